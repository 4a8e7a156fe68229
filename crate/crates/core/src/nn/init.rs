use rand::Rng;

use crate::scalar::Real;

/// Uniform samples in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Real, R: Rng>(
    rng: &mut R,
    n: usize,
    fan_in: usize,
    fan_out: usize,
) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n)
        .map(|_| T::lit(rng.random_range(-limit..=limit)))
        .collect()
}
