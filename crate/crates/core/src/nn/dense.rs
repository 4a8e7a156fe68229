use rand::Rng;

use super::kernels::{linear, linear_backward};
use super::{check_len, glorot_uniform, NnError, Param, Tensor};
use crate::scalar::Real;

/// `y = W x + b` over a batch of row vectors.
pub fn dense_forward<T: Real>(
    x: &[T],
    rows: usize,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Vec<T>, NnError> {
    let (out, inp) = (w.shape[0], w.shape[1]);
    check_len("dense bias", out, b.len())?;
    check_len("dense input", rows * inp, x.len())?;
    let mut y = vec![T::zero(); rows * out];
    linear(x, rows, inp, &w.data, &b.data, &mut y);
    Ok(y)
}

/// Returns `(grad_x, grad_w, grad_b)` for `grad_y` at input `x`.
pub fn dense_backward<T: Real>(
    x: &[T],
    rows: usize,
    w: &Tensor<T>,
    grad_y: &[T],
) -> Result<(Vec<T>, Tensor<T>, Tensor<T>), NnError> {
    let (out, inp) = (w.shape[0], w.shape[1]);
    check_len("dense input", rows * inp, x.len())?;
    check_len("dense output grad", rows * out, grad_y.len())?;
    let mut gw = Tensor::zeros(&[out, inp]);
    let mut gb = Tensor::zeros(&[out]);
    let mut gx = vec![T::zero(); rows * inp];
    linear_backward(
        x,
        rows,
        inp,
        &w.data,
        grad_y,
        &mut gw.data,
        &mut gb.data,
        Some(&mut gx),
    );
    Ok((gx, gw, gb))
}

/// Fully connected layer owning its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    pub w: Param<T>,
    pub b: Param<T>,
}

impl<T: Real> Dense<T> {
    pub fn new<R: Rng>(name: &str, inp: usize, out: usize, rng: &mut R) -> Self {
        let w = glorot_uniform(rng, inp * out, inp, out);
        Self {
            w: Param::new(format!("{name}.w"), Tensor::from_vec(&[out, inp], w)),
            b: Param::zeros(format!("{name}.b"), &[out]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.w.value.shape[1]
    }

    pub fn outputs(&self) -> usize {
        self.w.value.shape[0]
    }

    pub fn forward(&self, x: &[T], rows: usize) -> Vec<T> {
        let mut y = vec![T::zero(); rows * self.outputs()];
        linear(
            x,
            rows,
            self.inputs(),
            &self.w.value.data,
            &self.b.value.data,
            &mut y,
        );
        y
    }

    /// Accumulates parameter gradients; returns the input gradient when
    /// `need_input` is set.
    pub fn backward(
        &mut self,
        x: &[T],
        rows: usize,
        grad_y: &[T],
        need_input: bool,
    ) -> Option<Vec<T>> {
        let inp = self.inputs();
        let mut gx = need_input.then(|| vec![T::zero(); rows * inp]);
        linear_backward(
            x,
            rows,
            inp,
            &self.w.value.data,
            grad_y,
            &mut self.w.grad.data,
            &mut self.b.grad.data,
            gx.as_deref_mut(),
        );
        gx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        vec![&self.w, &self.b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data[i * 4] = 1.0f64;
        }
        let b = Tensor::zeros(&[3]);
        assert_eq!(
            dense_forward(&[1.0, -2.0, 3.5], 1, &w, &b).unwrap(),
            vec![1.0, -2.0, 3.5]
        );
    }

    #[test]
    fn zero_input_returns_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut d = Dense::<f64>::new("d", 5, 3, &mut rng);
        d.b.value.data = vec![0.5, -1.0, 2.0];
        assert_eq!(d.forward(&[0.0; 5], 1), vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let w = Tensor::<f64>::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2]);
        assert!(dense_forward(&[1.0, 2.0], 1, &w, &b).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (rows, inp, out) = (3, 5, 4);
        let w = Tensor::from_vec(&[out, inp], glorot_uniform(&mut rng, inp * out, inp, out));
        let b = Tensor::from_vec(&[out], glorot_uniform(&mut rng, out, 1, out));
        let x: Vec<f64> = glorot_uniform(&mut rng, rows * inp, 1, 1);
        let c: Vec<f64> = glorot_uniform(&mut rng, rows * out, 1, 1);
        // Scalar objective sum(c ⊙ y).
        let obj = |x: &[f64], w: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            let y = dense_forward(x, rows, w, b).unwrap();
            y.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let (gx, gw, gb) = dense_backward(&x, rows, &w, &c).unwrap();
        let ex = grad_check(|v| obj(v, &w, &b), &x, &gx, 1e-5);
        let ew = grad_check(
            |v| obj(&x, &Tensor::from_vec(&[out, inp], v.to_vec()), &b),
            &w.data,
            &gw.data,
            1e-5,
        );
        let eb = grad_check(
            |v| obj(&x, &w, &Tensor::from_vec(&[out], v.to_vec())),
            &b.data,
            &gb.data,
            1e-5,
        );
        assert!(ex < 1e-6 && ew < 1e-6 && eb < 1e-6, "{ex} {ew} {eb}");
    }
}
