use super::{check_len, NnError};
use crate::scalar::Real;

/// Root-mean-square error over every element and its gradient with respect
/// to `pred`. A zero loss yields a zero gradient.
pub fn rmse_loss<T: Real>(pred: &[T], label: &[T]) -> Result<(T, Vec<T>), NnError> {
    check_len("rmse labels", pred.len(), label.len())?;
    if pred.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    let n = T::from_usize(pred.len()).unwrap();
    let sq: T = pred
        .iter()
        .zip(label)
        .map(|(p, l)| (*p - *l) * (*p - *l))
        .sum();
    let loss = (sq / n).sqrt();
    if loss == T::zero() {
        return Ok((loss, vec![T::zero(); pred.len()]));
    }
    let scale = T::one() / (n * loss);
    let grad = pred
        .iter()
        .zip(label)
        .map(|(p, l)| (*p - *l) * scale)
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;

    #[test]
    fn perfect_prediction() {
        let (l, g) = rmse_loss(&[1.0f64, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_value() {
        let (l, _) = rmse_loss(&[3.0f64, 0.0, 4.0], &[0.0; 3]).unwrap();
        assert!((l - (25.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((l - 2.886751).abs() < 1e-6);
    }

    #[test]
    fn empty_and_mismatched_rejected() {
        assert!(matches!(
            rmse_loss::<f64>(&[], &[]),
            Err(NnError::EmptyBatch)
        ));
        assert!(rmse_loss(&[1.0f64], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = [0.3f64, -1.2, 0.7, 2.0, 0.1, -0.4];
        let l = [0.1f64, 0.2, -0.3, 1.0, 0.0, 0.5];
        let (_, g) = rmse_loss(&p, &l).unwrap();
        let err = grad_check(|v| rmse_loss(v, &l).unwrap().0, &p, &g, 1e-5);
        assert!(err < 1e-6, "{err}");
    }
}
