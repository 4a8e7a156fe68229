use serde::{Deserialize, Serialize};

use super::PositionDataset;

/// Per-feature z-score statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features whose spread was below 1e-12 and got unit scale.
    pub constant: Vec<usize>,
}

impl NormStats {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            constant: Vec::new(),
        }
    }

    /// Fits on a flat row-major block of `dim`-wide rows.
    pub fn fit(rows: &[f64], dim: usize) -> Self {
        let n = rows.len() / dim;
        assert!(n > 0, "normaliser needs at least one row");
        let mut mean = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for row in rows.chunks_exact(dim) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut constant = Vec::new();
        let std = var
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sd = (s / n as f64).sqrt();
                if sd < 1e-12 {
                    constant.push(i);
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Self {
            mean,
            std,
            constant,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// In-place z-score of one or more concatenated rows.
    pub fn apply(&self, rows: &mut [f64]) {
        let d = self.dim();
        for row in rows.chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn invert(&self, rows: &mut [f64]) {
        let d = self.dim();
        for row in rows.chunks_exact_mut(d) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
    }
}

pub fn fit_normalizer(train: &PositionDataset) -> NormStats {
    NormStats::fit(&train.inputs, train.dim())
}

/// Maps positions to the unit box around the workspace centre with a single
/// isotropic scale, so normalised distances times `scale` are metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScaler {
    pub center: [f64; 3],
    /// Half of the largest axis extent (m).
    pub scale: f64,
}

impl LabelScaler {
    pub fn fit<'a>(labels: impl IntoIterator<Item = &'a [f64; 3]>) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in labels {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        assert!(lo[0].is_finite(), "label scaler needs at least one label");
        let center = [0, 1, 2].map(|a| 0.5 * (lo[a] + hi[a]));
        let half = (0..3).map(|a| 0.5 * (hi[a] - lo[a])).fold(0.0, f64::max);
        Self {
            center,
            scale: if half > 1e-12 { half } else { 1.0 },
        }
    }

    pub fn normalize(&self, p: &[f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| (p[a] - self.center[a]) / self.scale)
    }

    pub fn denormalize(&self, z: &[f64]) -> [f64; 3] {
        [0, 1, 2].map(|a| z[a] * self.scale + self.center[a])
    }
}
