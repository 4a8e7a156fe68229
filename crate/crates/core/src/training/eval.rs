use serde::{Deserialize, Serialize};

use super::data::xbar_sequences;
use crate::dataset::{distance, BoardLayout, Episode, FeatureMask};
use crate::models::{GammaNet, LstmPosNet, ModelError};

/// How `mean_mm ± std_mm` are aggregated.
pub const AGGREGATION: &str =
    "mean error per episode, then mean and population standard deviation over episodes";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Seconds since episode start.
    pub t: f64,
    pub mean_mm: f64,
    pub std_mm: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_mm: f64,
    pub std_mm: f64,
    pub per_episode_mm: Vec<f64>,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Row-major mean error per board square; `None` where no episode ended.
    pub grid: Vec<Option<f64>>,
    /// Error against time, one point per sample index.
    pub curve: Vec<CurvePoint>,
    pub aggregation: String,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl EvalReport {
    /// Builds a report from per-episode `(sample index, error mm)` lists.
    pub fn from_errors(
        board: &BoardLayout,
        episodes: &[Episode],
        errors: &[Vec<(usize, f64)>],
    ) -> Self {
        let per_episode: Vec<f64> = errors
            .iter()
            .map(|e| mean_std(&e.iter().map(|(_, v)| *v).collect::<Vec<_>>()).0)
            .collect();
        let (mean_mm, std_mm) = mean_std(&per_episode);
        let mut sums = vec![(0.0, 0usize); board.num_squares()];
        for (ep, err) in episodes.iter().zip(&per_episode) {
            let sq = ep.meta.square.or_else(|| board.square_of(&ep.target()));
            if let Some(sq) = sq.filter(|s| s.row < board.rows && s.col < board.cols) {
                let cell = &mut sums[sq.row * board.cols + sq.col];
                cell.0 += err;
                cell.1 += 1;
            }
        }
        let grid = sums
            .iter()
            .map(|(s, n)| (*n > 0).then(|| s / *n as f64))
            .collect();
        let max_k = errors
            .iter()
            .flat_map(|e| e.iter().map(|(k, _)| *k + 1))
            .max()
            .unwrap_or(0);
        let mut by_k: Vec<Vec<f64>> = vec![Vec::new(); max_k];
        for e in errors {
            for (k, v) in e {
                by_k[*k].push(*v);
            }
        }
        let rate = episodes.first().map(|e| e.rate).unwrap_or(60.0);
        let curve = by_k
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| {
                let (m, s) = mean_std(v);
                CurvePoint {
                    t: k as f64 / rate,
                    mean_mm: m,
                    std_mm: s,
                    count: v.len(),
                }
            })
            .collect();
        Self {
            mean_mm,
            std_mm,
            per_episode_mm: per_episode,
            grid_rows: board.rows,
            grid_cols: board.cols,
            grid,
            curve,
            aggregation: AGGREGATION.to_string(),
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<f64> {
        self.grid[row * self.grid_cols + col]
    }

    /// Mean of the curve over `[t0, t1)`, weighting each point by its count.
    pub fn curve_mean(&self, t0: f64, t1: f64) -> Option<f64> {
        let (s, n) = self
            .curve
            .iter()
            .filter(|p| p.t >= t0 && p.t < t1)
            .fold((0.0, 0usize), |(s, n), p| {
                (s + p.mean_mm * p.count as f64, n + p.count)
            });
        (n > 0).then(|| s / n as f64)
    }
}

fn check_mask(expected: &FeatureMask, found: &FeatureMask) -> Result<(), ModelError> {
    if expected != found {
        return Err(ModelError::MaskMismatch {
            expected: expected.name.clone(),
            found: found.name.clone(),
        });
    }
    Ok(())
}

/// Wrist-position error of Γ on every sample of every episode.
pub fn evaluate_position(
    gamma: &GammaNet,
    episodes: &[Episode],
    mask: &FeatureMask,
    board: &BoardLayout,
) -> Result<EvalReport, ModelError> {
    check_mask(&gamma.mask, mask)?;
    let mut errors = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let xs: Vec<f64> = ep.samples.iter().flat_map(|s| mask.apply(&s.x)).collect();
        let p = gamma.predict_batch(&xs, ep.len())?;
        errors.push(
            ep.samples
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let q = [p[3 * k], p[3 * k + 1], p[3 * k + 2]];
                    (k, distance(&q, &s.p) * 1000.0)
                })
                .collect(),
        );
    }
    Ok(EvalReport::from_errors(board, episodes, &errors))
}

/// Φ prediction for every window of one episode, ordered by window end
/// (`H-1, H, …, len-1`).
pub fn episode_targets(
    phi: &LstmPosNet,
    gamma: Option<&GammaNet>,
    episode: &Episode,
) -> Result<Vec<[f64; 3]>, ModelError> {
    let h = phi.window();
    if episode.len() < h {
        return Err(ModelError::WindowLength {
            expected: h,
            found: episode.len(),
        });
    }
    let xbar = xbar_sequences(
        std::slice::from_ref(episode),
        &phi.mask,
        phi.config.mode,
        gamma,
    )?
    .pop()
    .unwrap();
    let d = phi.input_dim();
    let count = episode.len() + 1 - h;
    let mut windows = Vec::with_capacity(count * h * d);
    for end in h - 1..episode.len() {
        windows.extend_from_slice(&xbar[(end + 1 - h) * d..(end + 1) * d]);
    }
    let flat = phi.predict_batch(&windows, count)?;
    Ok(flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Target-prediction error of Φ at every window end of every episode.
pub fn evaluate_target(
    phi: &LstmPosNet,
    gamma: Option<&GammaNet>,
    episodes: &[Episode],
    mask: &FeatureMask,
    h: usize,
    board: &BoardLayout,
) -> Result<EvalReport, ModelError> {
    check_mask(&phi.mask, mask)?;
    if h != phi.window() {
        return Err(ModelError::WindowLength {
            expected: phi.window(),
            found: h,
        });
    }
    let mut errors = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let target = ep.target();
        let preds = episode_targets(phi, gamma, ep)?;
        errors.push(
            preds
                .iter()
                .enumerate()
                .map(|(i, p)| (h - 1 + i, distance(p, &target) * 1000.0))
                .collect(),
        );
    }
    Ok(EvalReport::from_errors(board, episodes, &errors))
}

/// Mean distance (mm) from each episode target to the targets' centroid;
/// the error of a predictor that always outputs the centroid.
pub fn mean_distance_to_centroid(episodes: &[Episode]) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    let targets: Vec<[f64; 3]> = episodes.iter().map(|e| e.target()).collect();
    let n = targets.len() as f64;
    let c = [0, 1, 2].map(|a| targets.iter().map(|t| t[a]).sum::<f64>() / n);
    targets.iter().map(|t| distance(t, &c)).sum::<f64>() / n * 1000.0
}
