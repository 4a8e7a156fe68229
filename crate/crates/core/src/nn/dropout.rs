use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NnError;
use crate::scalar::Real;

/// Inverted-dropout multipliers: `0` for dropped units, `1/(1-rate)` for
/// kept ones.
pub fn dropout_mask<T: Real, R: Rng>(rng: &mut R, n: usize, rate: f64) -> Result<Vec<T>, NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidRate(rate));
    }
    if rate == 0.0 {
        return Ok(vec![T::one(); n]);
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    Ok((0..n)
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect())
}

/// Applies seeded inverted dropout. In inference mode the input is returned
/// unchanged with an all-ones mask.
pub fn dropout<T: Real>(
    x: &[T],
    rate: f64,
    seed: u64,
    training: bool,
) -> Result<(Vec<T>, Vec<T>), NnError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(NnError::InvalidRate(rate));
    }
    if !training {
        return Ok((x.to_vec(), vec![T::one(); x.len()]));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = dropout_mask(&mut rng, x.len(), rate)?;
    let y = x.iter().zip(&mask).map(|(a, m)| *a * *m).collect();
    Ok((y, mask))
}
