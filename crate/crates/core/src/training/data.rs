use crate::dataset::{
    build_position_dataset, DatasetError, Episode, FeatureMask, LabelScaler, NormStats,
    PositionDataset,
};
use crate::models::{build_lstm_pos_input, GammaNet, InputMode, ModelError};

/// Normalised single-state pairs ready for Γ training.
#[derive(Clone, Debug)]
pub struct GammaData {
    pub dim: usize,
    pub xn: Vec<f64>,
    pub yn: Vec<f64>,
    /// Ground truth in metres.
    pub labels: Vec<[f64; 3]>,
    /// `(sample index, episode length)` of every pair.
    pub timeline: Vec<(usize, usize)>,
}

impl GammaData {
    pub fn new(ds: &PositionDataset, norm: &NormStats, scaler: &LabelScaler) -> Self {
        let mut xn = ds.inputs.clone();
        norm.apply(&mut xn);
        let yn = ds.labels.iter().flat_map(|p| scaler.normalize(p)).collect();
        Self {
            dim: ds.dim(),
            xn,
            yn,
            labels: ds.labels.clone(),
            timeline: ds.timeline.clone(),
        }
    }

    pub fn from_episodes(
        episodes: &[Episode],
        mask: &FeatureMask,
        norm: &NormStats,
        scaler: &LabelScaler,
    ) -> Result<Self, DatasetError> {
        Ok(Self::new(
            &build_position_dataset(episodes, mask)?,
            norm,
            scaler,
        ))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Normalised LSTM-Pos inputs: one x̄ sequence per episode plus the list of
/// H-windows over them.
#[derive(Clone, Debug)]
pub struct PhiData {
    pub d: usize,
    pub h: usize,
    pub seqs: Vec<Vec<f64>>,
    pub targets: Vec<[f64; 3]>,
    pub targets_n: Vec<[f64; 3]>,
    /// `(episode, window end index)`.
    pub windows: Vec<(usize, usize)>,
}

/// Unnormalised x̄ sequence of every episode.
pub fn xbar_sequences(
    episodes: &[Episode],
    mask: &FeatureMask,
    mode: InputMode,
    gamma: Option<&GammaNet>,
) -> Result<Vec<Vec<f64>>, ModelError> {
    if let Some(g) = gamma {
        if mode.needs_gamma() && g.mask != *mask {
            return Err(ModelError::MaskMismatch {
                expected: g.mask.name.clone(),
                found: mask.name.clone(),
            });
        }
    }
    episodes
        .iter()
        .map(|ep| {
            let states: Vec<f64> = ep.samples.iter().flat_map(|s| mask.apply(&s.x)).collect();
            build_lstm_pos_input(&states, ep.len(), mode, gamma)
        })
        .collect()
}

impl PhiData {
    /// Builds windows of length `h`. Input statistics and the label scaler
    /// are fitted here when not supplied (training set) and reused
    /// otherwise (validation and test sets).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        episodes: &[Episode],
        mask: &FeatureMask,
        h: usize,
        mode: InputMode,
        gamma: Option<&GammaNet>,
        norm: Option<&NormStats>,
        scaler: Option<&LabelScaler>,
    ) -> Result<(Self, NormStats, LabelScaler), ModelError> {
        if episodes.is_empty() {
            return Err(DatasetError::NoEpisodes.into());
        }
        if h == 0 {
            return Err(DatasetError::ZeroWindow.into());
        }
        let short: Vec<usize> = episodes
            .iter()
            .enumerate()
            .filter(|(_, e)| e.len() < h)
            .map(|(i, _)| i)
            .collect();
        if !short.is_empty() {
            return Err(DatasetError::EpisodeTooShort { h, episodes: short }.into());
        }
        let mut seqs = xbar_sequences(episodes, mask, mode, gamma)?;
        let d = mode.width(mask.dim());
        let norm = match norm {
            Some(n) => n.clone(),
            None => NormStats::fit(&seqs.concat(), d),
        };
        if norm.dim() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                found: norm.dim(),
            });
        }
        for s in &mut seqs {
            norm.apply(s);
        }
        let targets: Vec<[f64; 3]> = episodes.iter().map(|e| e.target()).collect();
        let scaler = match scaler {
            Some(s) => *s,
            None => LabelScaler::fit(targets.iter()),
        };
        let targets_n = targets.iter().map(|t| scaler.normalize(t)).collect();
        let windows = episodes
            .iter()
            .enumerate()
            .flat_map(|(e, ep)| (h - 1..ep.len()).map(move |end| (e, end)))
            .collect();
        Ok((
            Self {
                d,
                h,
                seqs,
                targets,
                targets_n,
                windows,
            },
            norm,
            scaler,
        ))
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let (e, end) = self.windows[i];
        &self.seqs[e][(end + 1 - self.h) * self.d..(end + 1) * self.d]
    }

    pub fn episode_len(&self, e: usize) -> usize {
        self.seqs[e].len() / self.d
    }
}
