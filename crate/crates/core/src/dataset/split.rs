use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetError, Episode, Square};

/// Stratified split: `test_per_square` episodes of every board square go to
/// the test set, chosen by a seeded shuffle. Relative order is preserved
/// within both outputs.
pub fn split_episodes(
    episodes: Vec<Episode>,
    test_per_square: usize,
    seed: u64,
) -> Result<(Vec<Episode>, Vec<Episode>), DatasetError> {
    let mut by_square: BTreeMap<Square, Vec<usize>> = BTreeMap::new();
    for (i, ep) in episodes.iter().enumerate() {
        let sq = ep.meta.square.ok_or(DatasetError::MissingSquare(i))?;
        by_square.entry(sq).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; episodes.len()];
    for (sq, mut idx) in by_square {
        if idx.len() < test_per_square {
            return Err(DatasetError::InsufficientEpisodes {
                square: sq,
                available: idx.len(),
                requested: test_per_square,
            });
        }
        idx.shuffle(&mut rng);
        for &i in &idx[..test_per_square] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = episodes.into_iter().zip(is_test).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(e, _)| e).collect(),
        test.into_iter().map(|(e, _)| e).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::test_support::ramp_episode;
    use crate::dataset::BoardLayout;

    fn corpus(per_square: usize) -> Vec<Episode> {
        let board = BoardLayout::default();
        let mut out = Vec::new();
        for rep in 0..per_square {
            for sq in board.squares() {
                let mut ep = ramp_episode(4, 2, 0.0);
                ep.meta.square = Some(sq);
                ep.meta.id = format!("{}-{}-{rep}", sq.row, sq.col);
                out.push(ep);
            }
        }
        out
    }

    #[test]
    fn protocol_split_sizes() {
        let (train, test) = split_episodes(corpus(28), 8, 1).unwrap();
        assert_eq!(train.len(), 840);
        assert_eq!(test.len(), 336);
        let ids: std::collections::HashSet<_> = train.iter().map(|e| &e.meta.id).collect();
        assert!(test.iter().all(|e| !ids.contains(&e.meta.id)));
    }

    #[test]
    fn zero_test_keeps_everything() {
        let (train, test) = split_episodes(corpus(3), 0, 1).unwrap();
        assert_eq!(train.len(), 126);
        assert!(test.is_empty());
    }

    #[test]
    fn over_request_fails() {
        assert!(matches!(
            split_episodes(corpus(3), 4, 1),
            Err(DatasetError::InsufficientEpisodes { .. })
        ));
    }

    #[test]
    fn deterministic_by_seed() {
        let a = split_episodes(corpus(5), 2, 7).unwrap();
        let b = split_episodes(corpus(5), 2, 7).unwrap();
        assert_eq!(a, b);
    }
}
