//! Episodes, feature masks, the two training sets (single states and
//! H-windows), normalisation and on-disk formats.

mod board;
mod build;
mod generate;
mod io;
mod mask;
mod norm;
mod split;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm_kinematics::ArmModel;

pub use board::{BoardLayout, Square};
pub use build::{build_position_dataset, build_sequence_dataset, PositionDataset, SequenceDataset};
pub use generate::{generate_episodes, generate_split, GenConfig, InitialPoseRanges};
pub use io::{
    load_episode, load_manifest, read_split_dir, save_episode, save_manifest, write_split_dirs,
    EpisodeRecord, Manifest, CSV_COLUMNS,
};
pub use mask::{feature_mask, FeatureMask, MASK_NAMES};
pub use norm::{fit_normalizer, LabelScaler, NormStats};
pub use split::split_episodes;

/// Width of the full two-band IMU state.
pub const STATE_DIM: usize = 18;

pub type State = [f64; STATE_DIM];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown feature mask `{0}`")]
    UnknownMask(String),
    #[error("feature mask is empty")]
    EmptyMask,
    #[error("invalid feature index {0}")]
    BadIndex(usize),
    #[error("no episodes given")]
    NoEpisodes,
    #[error("episode {episode} has state width {found}, expected {expected}")]
    DimensionMismatch {
        episode: usize,
        found: usize,
        expected: usize,
    },
    #[error("window length must be at least 1")]
    ZeroWindow,
    #[error("episodes shorter than H={h}: {episodes:?}")]
    EpisodeTooShort { h: usize, episodes: Vec<usize> },
    #[error("header does not match the episode schema: {0}")]
    Schema(String),
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("episode file has no samples")]
    EmptyEpisode,
    #[error("square {square:?} has {available} episodes, {requested} requested for test")]
    InsufficientEpisodes {
        square: Square,
        available: usize,
        requested: usize,
    },
    #[error("episode {0} has no board square")]
    MissingSquare(usize),
    #[error("generation failed for episode {index}: {message}")]
    Generation { index: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Seconds since the start of the episode.
    pub t: f64,
    /// Canonical 18-feature IMU state.
    pub x: State,
    /// Ground-truth wrist position (m).
    pub p: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub id: String,
    pub seed: u64,
    pub arm: ArmModel<f64>,
    pub torso_yaw: f64,
    /// Reach duration (s).
    pub t_f: f64,
    pub square: Option<Square>,
    /// Index of the band re-strapping block the episode was recorded in.
    pub mount_block: usize,
}

impl Default for EpisodeMeta {
    fn default() -> Self {
        Self {
            id: String::new(),
            seed: 0,
            arm: crate::arm_kinematics::participant_arm(),
            torso_yaw: 0.0,
            t_f: 0.0,
            square: None,
            mount_block: 0,
        }
    }
}

/// One reaching motion.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub rate: f64,
    pub samples: Vec<Sample>,
    pub meta: EpisodeMeta,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// First index of the trailing run over which the wrist no longer moves.
    pub fn hold_start(&self) -> usize {
        let Some(last) = self.samples.last() else {
            return 0;
        };
        let mut k = self.samples.len() - 1;
        while k > 0 && self.samples[k - 1].p == last.p {
            k -= 1;
        }
        k
    }

    /// Reaching target: the wrist position where the motion ends.
    pub fn target(&self) -> [f64; 3] {
        self.samples[self.hold_start()].p
    }
}

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Synthetic episode with a linear wrist path that holds from `hold`.
    pub fn ramp_episode(len: usize, hold: usize, offset: f64) -> Episode {
        let samples = (0..len)
            .map(|k| {
                let s = k.min(hold) as f64;
                let mut x = [0.0; STATE_DIM];
                for (i, v) in x.iter_mut().enumerate() {
                    *v = offset + k as f64 * 0.01 + i as f64;
                }
                Sample {
                    t: k as f64 / 60.0,
                    x,
                    p: [offset + 0.001 * s, 0.3 + 0.002 * s, -0.1],
                }
            })
            .collect();
        Episode {
            rate: 60.0,
            samples,
            meta: EpisodeMeta::default(),
        }
    }

    #[test]
    fn target_is_start_of_hold() {
        let ep = ramp_episode(120, 70, 0.0);
        assert_eq!(ep.hold_start(), 70);
        assert_eq!(ep.target(), ep.samples[119].p);
    }
}
