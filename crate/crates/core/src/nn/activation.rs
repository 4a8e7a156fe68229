use crate::scalar::Real;

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn relu_forward<T: Real>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// Zeroes `grad` where the ReLU output `y` is not positive.
pub fn relu_backward<T: Real>(y: &[T], grad: &mut [T]) {
    for (g, v) in grad.iter_mut().zip(y) {
        if *v <= T::zero() {
            *g = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_and_symmetric() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!((sigmoid(2.0f64) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
        assert_eq!(sigmoid(-800.0f64), 0.0);
        assert_eq!(sigmoid(800.0f64), 1.0);
    }

    #[test]
    fn relu_masks_negative_inputs() {
        let mut x = [-1.0f64, 0.0, 2.0];
        relu_forward(&mut x);
        assert_eq!(x, [0.0, 0.0, 2.0]);
        let mut g = [1.0, 1.0, 1.0];
        relu_backward(&x, &mut g);
        assert_eq!(g, [0.0, 0.0, 1.0]);
    }
}
