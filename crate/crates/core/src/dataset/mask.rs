use serde::{Deserialize, Serialize};

use super::{DatasetError, State, STATE_DIM};

/// Canonical names, in ablation-table order.
pub const MASK_NAMES: [&str; 7] = [
    "all",
    "accelerometers",
    "accel_mag",
    "gyroscopes",
    "magnetometers",
    "wrist_only",
    "upper_arm_only",
];

// State layout: wrist accel 0-2, gyro 3-5, mag 6-8; upper-arm accel 9-11,
// gyro 12-14, mag 15-17.
const ACCEL: [usize; 2] = [0, 9];
const GYRO: [usize; 2] = [3, 12];
const MAG: [usize; 2] = [6, 15];

fn triples(starts: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = starts.iter().flat_map(|&s| s..s + 3).collect();
    v.sort_unstable();
    v
}

/// Named subset of the canonical 18-feature state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMask {
    pub name: String,
    pub indices: Vec<usize>,
}

impl FeatureMask {
    pub fn named(name: &str) -> Result<Self, DatasetError> {
        let indices = match name {
            "all" => (0..STATE_DIM).collect(),
            "accelerometers" => triples(&ACCEL),
            "accel_mag" => triples(&[ACCEL[0], MAG[0], ACCEL[1], MAG[1]]),
            "gyroscopes" => triples(&GYRO),
            "magnetometers" => triples(&MAG),
            "wrist_only" => (0..9).collect(),
            "upper_arm_only" => (9..18).collect(),
            other => return Err(DatasetError::UnknownMask(other.to_string())),
        };
        Ok(Self {
            name: name.to_string(),
            indices,
        })
    }

    /// Custom mask; indices must be unique, ascending and in range.
    pub fn custom(name: &str, indices: Vec<usize>) -> Result<Self, DatasetError> {
        if indices.is_empty() {
            return Err(DatasetError::EmptyMask);
        }
        for w in indices.windows(2) {
            if w[1] <= w[0] {
                return Err(DatasetError::BadIndex(w[1]));
            }
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= STATE_DIM) {
            return Err(DatasetError::BadIndex(bad));
        }
        Ok(Self {
            name: name.to_string(),
            indices,
        })
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn apply_into(&self, x: &State, out: &mut Vec<f64>) {
        out.extend(self.indices.iter().map(|&i| x[i]));
    }

    pub fn apply(&self, x: &State) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        self.apply_into(x, &mut v);
        v
    }
}

/// Convenience for the canonical masks.
pub fn feature_mask(name: &str) -> Result<FeatureMask, DatasetError> {
    FeatureMask::named(name)
}
