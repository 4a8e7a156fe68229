use super::{DatasetError, Episode, FeatureMask, STATE_DIM};

/// Single-state training pairs `(x_i, p_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PositionDataset {
    pub mask: FeatureMask,
    /// Row-major `len × mask.dim()` masked states.
    pub inputs: Vec<f64>,
    pub labels: Vec<[f64; 3]>,
    /// Source episode of each pair.
    pub episode_of: Vec<usize>,
    /// `(index within the episode, episode length)` of each pair.
    pub timeline: Vec<(usize, usize)>,
}

impl PositionDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mask.dim()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.inputs[i * d..(i + 1) * d]
    }
}

fn check_width(episodes: &[Episode]) -> Result<(), DatasetError> {
    if episodes.is_empty() {
        return Err(DatasetError::NoEpisodes);
    }
    for (e, ep) in episodes.iter().enumerate() {
        if let Some(s) = ep.samples.first() {
            if s.x.len() != STATE_DIM {
                return Err(DatasetError::DimensionMismatch {
                    episode: e,
                    found: s.x.len(),
                    expected: STATE_DIM,
                });
            }
        }
    }
    Ok(())
}

pub fn build_position_dataset(
    episodes: &[Episode],
    mask: &FeatureMask,
) -> Result<PositionDataset, DatasetError> {
    if mask.indices.is_empty() {
        return Err(DatasetError::EmptyMask);
    }
    check_width(episodes)?;
    let total: usize = episodes.iter().map(Episode::len).sum();
    let mut ds = PositionDataset {
        mask: mask.clone(),
        inputs: Vec::with_capacity(total * mask.dim()),
        labels: Vec::with_capacity(total),
        episode_of: Vec::with_capacity(total),
        timeline: Vec::with_capacity(total),
    };
    for (e, ep) in episodes.iter().enumerate() {
        for (k, s) in ep.samples.iter().enumerate() {
            mask.apply_into(&s.x, &mut ds.inputs);
            ds.labels.push(s.p);
            ds.episode_of.push(e);
            ds.timeline.push((k, ep.len()));
        }
    }
    Ok(ds)
}

/// Windows of exactly `h` consecutive masked states, each labelled with
/// its episode's target.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceDataset {
    pub mask: FeatureMask,
    pub h: usize,
    /// Per episode, row-major `len × mask.dim()` masked states.
    pub states: Vec<Vec<f64>>,
    pub targets: Vec<[f64; 3]>,
    /// `(episode, index of the window's last state)`.
    pub windows: Vec<(usize, usize)>,
}

impl SequenceDataset {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.mask.dim()
    }

    /// The `i`-th window as a contiguous `h × dim` slice, oldest state first.
    pub fn window(&self, i: usize) -> &[f64] {
        let (e, end) = self.windows[i];
        let d = self.dim();
        &self.states[e][(end + 1 - self.h) * d..(end + 1) * d]
    }

    pub fn label(&self, i: usize) -> [f64; 3] {
        self.targets[self.windows[i].0]
    }

    /// `(position among the episode's windows, number of windows)`.
    pub fn timeline(&self, i: usize) -> (usize, usize) {
        let (e, end) = self.windows[i];
        let len = self.states[e].len() / self.dim();
        (end + 1 - self.h, len + 1 - self.h)
    }
}

pub fn build_sequence_dataset(
    episodes: &[Episode],
    h: usize,
    mask: &FeatureMask,
) -> Result<SequenceDataset, DatasetError> {
    if h == 0 {
        return Err(DatasetError::ZeroWindow);
    }
    if mask.indices.is_empty() {
        return Err(DatasetError::EmptyMask);
    }
    check_width(episodes)?;
    let short: Vec<usize> = episodes
        .iter()
        .enumerate()
        .filter(|(_, ep)| ep.len() < h)
        .map(|(i, _)| i)
        .collect();
    if !short.is_empty() {
        return Err(DatasetError::EpisodeTooShort { h, episodes: short });
    }
    let mut ds = SequenceDataset {
        mask: mask.clone(),
        h,
        states: Vec::with_capacity(episodes.len()),
        targets: Vec::with_capacity(episodes.len()),
        windows: Vec::new(),
    };
    for (e, ep) in episodes.iter().enumerate() {
        let mut flat = Vec::with_capacity(ep.len() * mask.dim());
        for s in &ep.samples {
            mask.apply_into(&s.x, &mut flat);
        }
        ds.states.push(flat);
        ds.targets.push(ep.target());
        ds.windows.extend((h - 1..ep.len()).map(|end| (e, end)));
    }
    Ok(ds)
}
