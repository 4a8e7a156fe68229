use crate::scalar::Real;

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error<T: Real>(analytic: T, numeric: T) -> T {
    let denom = analytic.abs().max(numeric.abs()).max(T::lit(1e-8));
    (analytic - numeric).abs() / denom
}

/// Largest relative error between `analytic` and central differences of `f`
/// around `params`.
pub fn grad_check<T: Real, F: FnMut(&[T]) -> T>(
    mut f: F,
    params: &[T],
    analytic: &[T],
    eps: T,
) -> T {
    assert_eq!(params.len(), analytic.len(), "gradient length");
    let mut p = params.to_vec();
    let mut worst = T::zero();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + eps;
        let up = f(&p);
        p[i] = orig - eps;
        let down = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (eps + eps);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let c = [0.5f64, -2.0, 3.0];
        let f = |p: &[f64]| p.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
        assert!(grad_check(f, &[1.0, 2.0, 3.0], &c, 1e-5) < 1e-10);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let f = |p: &[f64]| p[0] * p[0] + p[1].sin();
        let p = [0.7, 0.3];
        let good = [1.4, 0.3f64.cos()];
        assert!(grad_check(f, &p, &good, 1e-5) < 1e-8);
        let bad = [1.4 * 1.1, 0.3f64.cos()];
        assert!(grad_check(f, &p, &bad, 1e-5) > 1e-2);
    }
}
