use std::collections::VecDeque;

use crate::dataset::{Episode, Sample};
use crate::models::{build_lstm_pos_input, GammaNet, LstmPosNet, ModelError};

/// Anything that turns a sample stream into target predictions.
pub trait TargetSource {
    /// Samples needed before the first prediction.
    fn window(&self) -> usize;
    /// Clears per-episode state before a new stream starts.
    fn begin(&mut self, episode: &Episode);
    fn push(&mut self, sample: &Sample) -> Result<Option<[f64; 3]>, ModelError>;
}

/// Ring buffer of the last `H` masked states feeding Φ.
///
/// Each state's per-step Φ input is computed once on arrival, so a push
/// costs one Γ row plus one Φ window.
#[derive(Clone, Debug)]
pub struct StreamPredictor<'a> {
    phi: &'a LstmPosNet,
    gamma: Option<&'a GammaNet>,
    states: VecDeque<Vec<f64>>,
    inputs: VecDeque<Vec<f64>>,
    count: u64,
    window: Vec<f64>,
}

impl<'a> StreamPredictor<'a> {
    pub fn new(phi: &'a LstmPosNet, gamma: Option<&'a GammaNet>) -> Result<Self, ModelError> {
        if phi.config.mode.needs_gamma() {
            let g = gamma.ok_or(ModelError::MissingGamma)?;
            if g.mask != phi.mask {
                return Err(ModelError::MaskMismatch {
                    expected: phi.mask.name.clone(),
                    found: g.mask.name.clone(),
                });
            }
        }
        let h = phi.window();
        Ok(Self {
            phi,
            gamma,
            states: VecDeque::with_capacity(h),
            inputs: VecDeque::with_capacity(h),
            count: 0,
            window: Vec::with_capacity(h * phi.input_dim()),
        })
    }

    /// Masked state width expected by [`push_sample`](Self::push_sample).
    pub fn state_dim(&self) -> usize {
        self.phi.mask.dim()
    }

    /// Samples pushed since the last reset.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Buffered masked states, oldest first.
    pub fn buffered(&self) -> impl Iterator<Item = &[f64]> {
        self.states.iter().map(|s| s.as_slice())
    }

    pub fn reset(&mut self) {
        self.states.clear();
        self.inputs.clear();
        self.count = 0;
    }

    /// Pushes one masked state; returns Φ's target once `H` states are held.
    pub fn push_sample(&mut self, x: &[f64]) -> Result<Option<[f64; 3]>, ModelError> {
        let n = self.state_dim();
        if x.len() != n {
            return Err(ModelError::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let step = build_lstm_pos_input(x, 1, self.phi.config.mode, self.gamma)?;
        let h = self.phi.window();
        if self.states.len() == h {
            self.states.pop_front();
            self.inputs.pop_front();
        }
        self.states.push_back(x.to_vec());
        self.inputs.push_back(step);
        self.count += 1;
        if self.states.len() < h {
            return Ok(None);
        }
        self.window.clear();
        for row in &self.inputs {
            self.window.extend_from_slice(row);
        }
        self.phi.predict(&self.window).map(Some)
    }
}

impl TargetSource for StreamPredictor<'_> {
    fn window(&self) -> usize {
        self.phi.window()
    }

    fn begin(&mut self, _: &Episode) {
        self.reset();
    }

    fn push(&mut self, sample: &Sample) -> Result<Option<[f64; 3]>, ModelError> {
        let x = self.phi.mask.apply(&sample.x);
        self.push_sample(&x)
    }
}

/// Reports the true target once `window` samples have arrived.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    pub window: usize,
    target: [f64; 3],
    seen: usize,
}

impl OraclePredictor {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            target: [0.0; 3],
            seen: 0,
        }
    }
}

impl TargetSource for OraclePredictor {
    fn window(&self) -> usize {
        self.window
    }

    fn begin(&mut self, episode: &Episode) {
        self.target = episode.target();
        self.seen = 0;
    }

    fn push(&mut self, _: &Sample) -> Result<Option<[f64; 3]>, ModelError> {
        self.seen += 1;
        Ok((self.seen >= self.window).then_some(self.target))
    }
}
