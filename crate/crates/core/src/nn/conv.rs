use rand::Rng;

use super::{check_len, glorot_uniform, NnError, Param, Tensor};
use crate::scalar::Real;

/// Same-padded, stride-1 cross-correlation of one `cin × len` input with a
/// `cout × cin × k` kernel bank.
pub fn conv1d_forward<T: Real>(
    x: &[T],
    len: usize,
    w: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Vec<T>, NnError> {
    let (cout, cin, k) = (w.shape[0], w.shape[1], w.shape[2]);
    if k % 2 == 0 {
        return Err(NnError::EvenKernel(k));
    }
    check_len("conv input", cin * len, x.len())?;
    check_len("conv bias", cout, b.len())?;
    let mut y = vec![T::zero(); cout * len];
    conv_into(x, len, &w.data, &b.data, (cout, cin, k), &mut y);
    Ok(y)
}

/// Returns `(grad_x, grad_w, grad_b)`.
pub fn conv1d_backward<T: Real>(
    x: &[T],
    len: usize,
    w: &Tensor<T>,
    grad_y: &[T],
) -> Result<(Vec<T>, Tensor<T>, Tensor<T>), NnError> {
    let (cout, cin, k) = (w.shape[0], w.shape[1], w.shape[2]);
    if k % 2 == 0 {
        return Err(NnError::EvenKernel(k));
    }
    check_len("conv input", cin * len, x.len())?;
    check_len("conv output grad", cout * len, grad_y.len())?;
    let mut gw = Tensor::zeros(&w.shape);
    let mut gb = Tensor::zeros(&[cout]);
    let mut gx = vec![T::zero(); cin * len];
    conv_backward_into(
        x,
        len,
        &w.data,
        (cout, cin, k),
        grad_y,
        &mut gw.data,
        &mut gb.data,
        Some(&mut gx),
    );
    Ok((gx, gw, gb))
}

fn conv_into<T: Real>(
    x: &[T],
    len: usize,
    w: &[T],
    b: &[T],
    dims: (usize, usize, usize),
    y: &mut [T],
) {
    let (cout, cin, k) = dims;
    let half = k / 2;
    for co in 0..cout {
        let yr = &mut y[co * len..(co + 1) * len];
        for t in 0..len {
            let mut s = b[co];
            for ci in 0..cin {
                let xr = &x[ci * len..(ci + 1) * len];
                let wr = &w[(co * cin + ci) * k..(co * cin + ci + 1) * k];
                for (j, wj) in wr.iter().enumerate() {
                    let idx = t + j;
                    if idx >= half && idx - half < len {
                        s += *wj * xr[idx - half];
                    }
                }
            }
            yr[t] = s;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward_into<T: Real>(
    x: &[T],
    len: usize,
    w: &[T],
    dims: (usize, usize, usize),
    gy: &[T],
    gw: &mut [T],
    gb: &mut [T],
    mut gx: Option<&mut [T]>,
) {
    let (cout, cin, k) = dims;
    let half = k / 2;
    for co in 0..cout {
        for t in 0..len {
            let g = gy[co * len + t];
            if g == T::zero() {
                continue;
            }
            gb[co] += g;
            for ci in 0..cin {
                let base = (co * cin + ci) * k;
                for j in 0..k {
                    let idx = t + j;
                    if idx >= half && idx - half < len {
                        let xi = ci * len + idx - half;
                        gw[base + j] += g * x[xi];
                        if let Some(gx) = gx.as_deref_mut() {
                            gx[xi] += g * w[base + j];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution layer applied independently to each sample of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d<T> {
    pub w: Param<T>,
    pub b: Param<T>,
}

impl<T: Real> Conv1d<T> {
    pub fn new<R: Rng>(
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        if kernel % 2 == 0 {
            return Err(NnError::EvenKernel(kernel));
        }
        let w = glorot_uniform(rng, cout * cin * kernel, cin * kernel, cout * kernel);
        Ok(Self {
            w: Param::new(
                format!("{name}.w"),
                Tensor::from_vec(&[cout, cin, kernel], w),
            ),
            b: Param::zeros(format!("{name}.b"), &[cout]),
        })
    }

    fn dims(&self) -> (usize, usize, usize) {
        let s = &self.w.value.shape;
        (s[0], s[1], s[2])
    }

    pub fn in_channels(&self) -> usize {
        self.dims().1
    }

    pub fn out_channels(&self) -> usize {
        self.dims().0
    }

    /// `x` laid out `[n][cin][len]`; returns `[n][cout][len]`.
    pub fn forward(&self, x: &[T], n: usize, len: usize) -> Vec<T> {
        let dims = self.dims();
        let (cout, cin, _) = dims;
        let mut y = vec![T::zero(); n * cout * len];
        for s in 0..n {
            conv_into(
                &x[s * cin * len..(s + 1) * cin * len],
                len,
                &self.w.value.data,
                &self.b.value.data,
                dims,
                &mut y[s * cout * len..(s + 1) * cout * len],
            );
        }
        y
    }

    pub fn backward(
        &mut self,
        x: &[T],
        n: usize,
        len: usize,
        grad_y: &[T],
        need_input: bool,
    ) -> Option<Vec<T>> {
        let dims = self.dims();
        let (cout, cin, _) = dims;
        let mut gx = need_input.then(|| vec![T::zero(); n * cin * len]);
        for s in 0..n {
            conv_backward_into(
                &x[s * cin * len..(s + 1) * cin * len],
                len,
                &self.w.value.data,
                dims,
                &grad_y[s * cout * len..(s + 1) * cout * len],
                &mut self.w.grad.data,
                &mut self.b.grad.data,
                gx.as_deref_mut()
                    .map(|g| &mut g[s * cin * len..(s + 1) * cin * len]),
            );
        }
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
    fn identity_kernel() {
        let w = Tensor::from_vec(&[1, 1, 3], vec![0.0, 1.0, 0.0]);
        let b = Tensor::zeros(&[1]);
        let x = [1.5, -2.0, 0.25, 4.0];
        assert_eq!(conv1d_forward(&x, 4, &w, &b).unwrap(), x.to_vec());
    }

    #[test]
    fn ones_kernel_hand_result() {
        let w = Tensor::from_vec(&[1, 1, 3], vec![1.0; 3]);
        let b = Tensor::zeros(&[1]);
        assert_eq!(
            conv1d_forward(&[1.0, 2.0, 3.0], 3, &w, &b).unwrap(),
            vec![3.0, 6.0, 5.0]
        );
    }

    #[test]
    fn even_kernel_rejected() {
        let w = Tensor::<f64>::zeros(&[1, 1, 2]);
        assert!(matches!(
            conv1d_forward(&[1.0, 2.0], 2, &w, &Tensor::zeros(&[1])),
            Err(NnError::EvenKernel(2))
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (cin, cout, k, len) = (2, 3, 3, 6);
        let w = Tensor::from_vec(
            &[cout, cin, k],
            glorot_uniform(&mut rng, cout * cin * k, 2, 2),
        );
        let b = Tensor::from_vec(&[cout], glorot_uniform(&mut rng, cout, 1, 1));
        let x: Vec<f64> = glorot_uniform(&mut rng, cin * len, 1, 1);
        let c: Vec<f64> = glorot_uniform(&mut rng, cout * len, 1, 1);
        let obj = |x: &[f64], w: &Tensor<f64>, b: &Tensor<f64>| -> f64 {
            let y = conv1d_forward(x, len, w, b).unwrap();
            y.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let (gx, gw, gb) = conv1d_backward(&x, len, &w, &c).unwrap();
        let ex = grad_check(|v| obj(v, &w, &b), &x, &gx, 1e-5);
        let ew = grad_check(
            |v| obj(&x, &Tensor::from_vec(&w.shape, v.to_vec()), &b),
            &w.data,
            &gw.data,
            1e-5,
        );
        let eb = grad_check(
            |v| obj(&x, &w, &Tensor::from_vec(&[cout], v.to_vec())),
            &b.data,
            &gb.data,
            1e-5,
        );
        assert!(ex < 1e-6 && ew < 1e-6 && eb < 1e-6, "{ex} {ew} {eb}");
    }

    #[test]
    fn batched_layer_matches_single_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let conv = Conv1d::<f64>::new("c", 2, 4, 3, &mut rng).unwrap();
        let x: Vec<f64> = glorot_uniform(&mut rng, 3 * 2 * 5, 1, 1);
        let y = conv.forward(&x, 3, 5);
        for s in 0..3 {
            let ys =
                conv1d_forward(&x[s * 10..(s + 1) * 10], 5, &conv.w.value, &conv.b.value).unwrap();
            assert_eq!(&y[s * 20..(s + 1) * 20], ys.as_slice());
        }
    }
}
