use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{corrupt, dense_param_count, header_kind, ModelError};
use crate::dataset::{FeatureMask, LabelScaler, NormStats};
use crate::nn::{relu_backward, relu_forward, Dense, Param, WeightBlock, WeightFile};

const KIND: &str = "gamma";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    /// Hidden layer widths, each followed by ReLU.
    pub hidden: Vec<usize>,
    /// Weight initialisation seed.
    pub seed: u64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            hidden: vec![512; 3],
            seed: 0,
        }
    }
}

impl GammaConfig {
    pub fn param_count(&self, n: usize) -> usize {
        let mut widths = vec![n];
        widths.extend(&self.hidden);
        widths.push(3);
        widths
            .windows(2)
            .map(|w| dense_param_count(w[0], w[1]))
            .sum()
    }
}

/// Layer activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GammaCache {
    pub rows: usize,
    acts: Vec<Vec<f64>>,
}

/// Feed-forward map from one masked state to the wrist position.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaNet {
    pub config: GammaConfig,
    pub mask: FeatureMask,
    pub norm: NormStats,
    pub labels: LabelScaler,
    pub layers: Vec<Dense<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    config: GammaConfig,
    mask: FeatureMask,
    norm: NormStats,
    labels: LabelScaler,
}

impl GammaNet {
    pub fn new(
        config: GammaConfig,
        mask: FeatureMask,
        norm: NormStats,
        labels: LabelScaler,
    ) -> Result<Self, ModelError> {
        if norm.dim() != mask.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: mask.dim(),
                found: norm.dim(),
            });
        }
        if config.hidden.contains(&0) {
            return Err(ModelError::InvalidConfig(
                "hidden widths must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut widths = vec![mask.dim()];
        widths.extend(&config.hidden);
        widths.push(3);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(&format!("gamma.{i}"), w[0], w[1], &mut rng))
            .collect();
        Ok(Self {
            config,
            mask,
            norm,
            labels,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mask.dim()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass on z-scored inputs; returns normalised positions.
    pub fn forward_normalized(&self, xn: &[f64], rows: usize) -> Vec<f64> {
        let mut a = xn.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            a = layer.forward(&a, rows);
            if i < last {
                relu_forward(&mut a);
            }
        }
        a
    }

    pub fn forward_train(&self, xn: &[f64], rows: usize) -> (Vec<f64>, GammaCache) {
        let last = self.layers.len() - 1;
        let mut acts = vec![xn.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut a = layer.forward(acts.last().unwrap(), rows);
            if i < last {
                relu_forward(&mut a);
            }
            acts.push(a);
        }
        let out = acts.pop().unwrap();
        (out, GammaCache { rows, acts })
    }

    /// Accumulates parameter gradients for `grad_out` (normalised space).
    pub fn backward(&mut self, cache: &GammaCache, grad_out: &[f64]) {
        let mut g = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.acts[i];
            let gx = self.layers[i].backward(input, cache.rows, &g, i > 0);
            if let Some(mut gx) = gx {
                relu_backward(input, &mut gx);
                g = gx;
            }
        }
    }

    fn check_width(&self, found: usize) -> Result<(), ModelError> {
        if found != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                found,
            });
        }
        Ok(())
    }

    /// Wrist position (m) for one masked state.
    pub fn predict(&self, x: &[f64]) -> Result<[f64; 3], ModelError> {
        self.check_width(x.len())?;
        let mut xn = x.to_vec();
        self.norm.apply(&mut xn);
        Ok(self.labels.denormalize(&self.forward_normalized(&xn, 1)))
    }

    /// Positions (m) for `rows` concatenated masked states, flat `[rows][3]`.
    pub fn predict_batch(&self, xs: &[f64], rows: usize) -> Result<Vec<f64>, ModelError> {
        if xs.len() != rows * self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: rows * self.input_dim(),
                found: xs.len(),
            });
        }
        let mut xn = xs.to_vec();
        self.norm.apply(&mut xn);
        let z = self.forward_normalized(&xn, rows);
        Ok(z.chunks_exact(3)
            .flat_map(|r| self.labels.denormalize(r))
            .collect())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn params(&self) -> Vec<&Param<f64>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let header = Header {
            kind: KIND.into(),
            config: self.config.clone(),
            mask: self.mask.clone(),
            norm: self.norm.clone(),
            labels: self.labels,
        };
        WeightFile {
            header: serde_json::to_value(header).expect("header serialises"),
            blocks: self
                .params()
                .into_iter()
                .map(WeightBlock::from_param)
                .collect(),
        }
    }

    pub fn from_weight_file(file: &WeightFile) -> Result<Self, ModelError> {
        let kind = header_kind(&file.header);
        if kind != KIND {
            return Err(ModelError::ArchitectureMismatch {
                expected: KIND.into(),
                found: kind,
            });
        }
        let h: Header = serde_json::from_value(file.header.clone())
            .map_err(|e| ModelError::CorruptFile(format!("header: {e}")))?;
        let mut net = Self::new(h.config, h.mask, h.norm, h.labels)?;
        file.restore(&mut net.params_mut()).map_err(corrupt)?;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        Ok(self.to_weight_file().save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_weight_file(&WeightFile::load(path).map_err(corrupt)?)
    }
}
