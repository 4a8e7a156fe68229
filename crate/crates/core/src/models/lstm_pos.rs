use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{corrupt, dense_param_count, header_kind, GammaNet, InputMode, ModelError};
use crate::dataset::{FeatureMask, LabelScaler, NormStats};
use crate::nn::{
    dropout_mask, relu_backward, relu_forward, Conv1d, Dense, Lstm, LstmCache, Param, WeightBlock,
    WeightFile,
};

const KIND: &str = "lstm_pos";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmPosConfig {
    pub mode: InputMode,
    /// Parallel dropout rows sharing the LSTM weights.
    pub a: usize,
    /// Stacked LSTM layers per row.
    pub b: usize,
    /// LSTM hidden size.
    pub m: usize,
    /// Window length.
    pub h: usize,
    /// Dropout rate on every LSTM layer's input sequence (training only).
    pub dropout: f64,
    /// Output channels of each convolution layer.
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub head_hidden: usize,
    pub seed: u64,
}

impl Default for LstmPosConfig {
    fn default() -> Self {
        Self {
            mode: InputMode::PosOnly,
            a: 8,
            b: 2,
            m: 64,
            h: 60,
            dropout: 0.1,
            conv_channels: vec![8, 8, 4],
            kernel: 3,
            head_hidden: 14,
            seed: 0,
        }
    }
}

impl LstmPosConfig {
    /// Trainable parameters for raw state width `n`. Rows share weights, so
    /// `a` does not enter the count.
    pub fn param_count(&self, n: usize) -> usize {
        let d = self.mode.width(n);
        let m = self.m;
        let lstm: usize = (0..self.b)
            .map(|l| {
                let inp = if l == 0 { d } else { m };
                4 * m * (m + inp) + 4 * m
            })
            .sum();
        let mut conv = 0;
        let mut cin = 1;
        for &c in &self.conv_channels {
            conv += c * cin * self.kernel + c;
            cin = c;
        }
        let head =
            dense_param_count(cin * m, self.head_hidden) + dense_param_count(self.head_hidden, 3);
        lstm + conv + head
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.into()));
        if self.a == 0 || self.b == 0 || self.m == 0 || self.h == 0 || self.head_hidden == 0 {
            return bad("a, b, m, h and head_hidden must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.kernel % 2 == 0 {
            return bad("kernel length must be odd");
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad("at least one convolution layer with positive channels is required");
        }
        Ok(())
    }
}

/// Per-step LSTM-Pos input for `rows` consecutive masked states (flat
/// `[rows][n]`): Γ positions, raw states, or both concatenated. Γ only runs
/// forward, so no gradient reaches it.
pub fn build_lstm_pos_input(
    states: &[f64],
    rows: usize,
    mode: InputMode,
    gamma: Option<&GammaNet>,
) -> Result<Vec<f64>, ModelError> {
    if rows == 0 || states.len() % rows != 0 {
        return Err(ModelError::DimensionMismatch {
            expected: rows,
            found: states.len(),
        });
    }
    let n = states.len() / rows;
    if mode == InputMode::RawOnly {
        return Ok(states.to_vec());
    }
    let gamma = gamma.ok_or(ModelError::MissingGamma)?;
    let pos = gamma.predict_batch(states, rows)?;
    Ok(match mode {
        InputMode::PosOnly => pos,
        _ => {
            let mut out = Vec::with_capacity(rows * (n + 3));
            for r in 0..rows {
                out.extend_from_slice(&states[r * n..(r + 1) * n]);
                out.extend_from_slice(&pos[r * 3..r * 3 + 3]);
            }
            out
        }
    })
}

/// Forward state needed by [`LstmPosNet::backward`].
#[derive(Clone, Debug)]
pub struct LstmPosCache {
    batch: usize,
    rows: usize,
    masks: Vec<Vec<f64>>,
    lstm: Vec<LstmCache<f64>>,
    /// Input of each convolution layer, then the final activation.
    conv_acts: Vec<Vec<f64>>,
    pooled: Vec<f64>,
    hidden: Vec<f64>,
}

/// LSTM-Pos target predictor.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmPosNet {
    pub config: LstmPosConfig,
    pub mask: FeatureMask,
    /// Statistics of the per-step input x̄.
    pub norm: NormStats,
    pub labels: LabelScaler,
    pub lstm: Vec<Lstm<f64>>,
    pub conv: Vec<Conv1d<f64>>,
    pub head: Dense<f64>,
    pub out: Dense<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    config: LstmPosConfig,
    mask: FeatureMask,
    norm: NormStats,
    labels: LabelScaler,
}

impl LstmPosNet {
    pub fn new(
        config: LstmPosConfig,
        mask: FeatureMask,
        norm: NormStats,
        labels: LabelScaler,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.mode.width(mask.dim());
        if norm.dim() != d {
            return Err(ModelError::DimensionMismatch {
                expected: d,
                found: norm.dim(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let m = config.m;
        let lstm = (0..config.b)
            .map(|l| {
                Lstm::new(
                    &format!("lstm.{l}"),
                    if l == 0 { d } else { m },
                    m,
                    &mut rng,
                )
            })
            .collect();
        let mut conv = Vec::new();
        let mut cin = 1;
        for (i, &c) in config.conv_channels.iter().enumerate() {
            conv.push(Conv1d::new(
                &format!("conv.{i}"),
                cin,
                c,
                config.kernel,
                &mut rng,
            )?);
            cin = c;
        }
        let head = Dense::new("head", cin * m, config.head_hidden, &mut rng);
        let out = Dense::new("out", config.head_hidden, 3, &mut rng);
        Ok(Self {
            config,
            mask,
            norm,
            labels,
            lstm,
            conv,
            head,
            out,
        })
    }

    /// Per-step input width d.
    pub fn input_dim(&self) -> usize {
        self.norm.dim()
    }

    pub fn window(&self) -> usize {
        self.config.h
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn conv_out(&self) -> usize {
        *self.config.conv_channels.last().unwrap()
    }

    /// Inference on z-scored windows (flat `[batch][H][d]`). Dropout is off,
    /// so every row is identical and a single row is evaluated.
    pub fn forward_normalized(&self, xn: &[f64], batch: usize) -> Vec<f64> {
        let h = self.config.h;
        let m = self.config.m;
        let mut seq = xn.to_vec();
        for layer in &self.lstm {
            seq = layer.forward(&seq, batch, h, false).0;
        }
        let mut act: Vec<f64> = (0..batch)
            .flat_map(|s| seq[(s * h + h - 1) * m..(s * h + h) * m].to_vec())
            .collect();
        for c in &self.conv {
            act = c.forward(&act, batch, m);
            relu_forward(&mut act);
        }
        let mut hidden = self.head.forward(&act, batch);
        relu_forward(&mut hidden);
        self.out.forward(&hidden, batch)
    }

    /// Training forward: `a` dropout rows per window, masks drawn from
    /// `mask_seed`, conv features averaged over the rows.
    pub fn forward_train(
        &self,
        xn: &[f64],
        batch: usize,
        mask_seed: u64,
    ) -> (Vec<f64>, LstmPosCache) {
        let cfg = &self.config;
        let (a, h, m) = (cfg.a, cfg.h, cfg.m);
        let rows = batch * a;
        let d = self.input_dim();
        assert_eq!(xn.len(), batch * h * d, "window batch length");
        let mut rng = ChaCha8Rng::seed_from_u64(mask_seed);
        let mut masks = Vec::with_capacity(cfg.b);
        let mut caches = Vec::with_capacity(cfg.b);
        let mut seq: Vec<f64> = (0..batch)
            .flat_map(|s| (0..a).flat_map(move |_| xn[s * h * d..(s + 1) * h * d].iter().copied()))
            .collect();
        for layer in &self.lstm {
            if cfg.dropout > 0.0 {
                let mask = dropout_mask(&mut rng, seq.len(), cfg.dropout).expect("validated rate");
                seq.iter_mut().zip(&mask).for_each(|(v, k)| *v *= k);
                masks.push(mask);
            } else {
                masks.push(Vec::new());
            }
            let (out, cache) = layer.forward(&seq, rows, h, true);
            seq = out;
            caches.push(cache);
        }
        let last: Vec<f64> = (0..rows)
            .flat_map(|r| seq[(r * h + h - 1) * m..(r * h + h) * m].to_vec())
            .collect();
        let mut conv_acts = vec![last];
        for c in &self.conv {
            let mut y = c.forward(conv_acts.last().unwrap(), rows, m);
            relu_forward(&mut y);
            conv_acts.push(y);
        }
        let feat = self.conv_out() * m;
        let fin = conv_acts.last().unwrap();
        let inv_a = 1.0 / a as f64;
        let mut pooled = vec![0.0; batch * feat];
        for s in 0..batch {
            let dst = &mut pooled[s * feat..(s + 1) * feat];
            for r in 0..a {
                let src = &fin[(s * a + r) * feat..(s * a + r + 1) * feat];
                dst.iter_mut().zip(src).for_each(|(p, v)| *p += v);
            }
            dst.iter_mut().for_each(|p| *p *= inv_a);
        }
        let mut hidden = self.head.forward(&pooled, batch);
        relu_forward(&mut hidden);
        let out = self.out.forward(&hidden, batch);
        (
            out,
            LstmPosCache {
                batch,
                rows,
                masks,
                lstm: caches,
                conv_acts,
                pooled,
                hidden,
            },
        )
    }

    /// Accumulates parameter gradients for `grad_out` (normalised space).
    pub fn backward(&mut self, cache: &LstmPosCache, grad_out: &[f64]) {
        let (a, h, m) = (self.config.a, self.config.h, self.config.m);
        let (batch, rows) = (cache.batch, cache.rows);
        let mut g = self
            .out
            .backward(&cache.hidden, batch, grad_out, true)
            .unwrap();
        relu_backward(&cache.hidden, &mut g);
        let g_pooled = self.head.backward(&cache.pooled, batch, &g, true).unwrap();
        let feat = self.conv_out() * m;
        let inv_a = 1.0 / a as f64;
        let mut g: Vec<f64> = (0..rows)
            .flat_map(|r| {
                g_pooled[(r / a) * feat..(r / a + 1) * feat]
                    .iter()
                    .map(move |v| v * inv_a)
            })
            .collect();
        for i in (0..self.conv.len()).rev() {
            relu_backward(&cache.conv_acts[i + 1], &mut g);
            g = self.conv[i]
                .backward(&cache.conv_acts[i], rows, m, &g, true)
                .unwrap();
        }
        let mut g_seq = vec![0.0; rows * h * m];
        for r in 0..rows {
            g_seq[(r * h + h - 1) * m..(r * h + h) * m].copy_from_slice(&g[r * m..(r + 1) * m]);
        }
        for l in (0..self.lstm.len()).rev() {
            let need_input = l > 0;
            let gx = self.lstm[l].backward(&cache.lstm[l], &g_seq, need_input);
            if let Some(mut gx) = gx {
                if !cache.masks[l].is_empty() {
                    gx.iter_mut()
                        .zip(&cache.masks[l])
                        .for_each(|(v, k)| *v *= k);
                }
                g_seq = gx;
            }
        }
    }

    fn check_window(&self, xbar: &[f64]) -> Result<(), ModelError> {
        let want = self.config.h * self.input_dim();
        if xbar.len() != want {
            if xbar.len() % self.input_dim() == 0 {
                return Err(ModelError::WindowLength {
                    expected: self.config.h,
                    found: xbar.len() / self.input_dim(),
                });
            }
            return Err(ModelError::DimensionMismatch {
                expected: want,
                found: xbar.len(),
            });
        }
        Ok(())
    }

    /// Target (m) from one window of x̄ (flat `[H][d]`, unnormalised).
    pub fn predict(&self, xbar: &[f64]) -> Result<[f64; 3], ModelError> {
        self.check_window(xbar)?;
        let mut xn = xbar.to_vec();
        self.norm.apply(&mut xn);
        Ok(self.labels.denormalize(&self.forward_normalized(&xn, 1)))
    }

    /// Targets (m) for `batch` concatenated windows, flat `[batch][3]`.
    pub fn predict_batch(&self, xbar: &[f64], batch: usize) -> Result<Vec<f64>, ModelError> {
        let want = batch * self.config.h * self.input_dim();
        if xbar.len() != want {
            return Err(ModelError::DimensionMismatch {
                expected: want,
                found: xbar.len(),
            });
        }
        let mut xn = xbar.to_vec();
        self.norm.apply(&mut xn);
        let z = self.forward_normalized(&xn, batch);
        Ok(z.chunks_exact(3)
            .flat_map(|r| self.labels.denormalize(r))
            .collect())
    }

    /// Target from a window of raw masked states, running Γ as needed.
    pub fn predict_states(
        &self,
        states: &[f64],
        gamma: Option<&GammaNet>,
    ) -> Result<[f64; 3], ModelError> {
        let xbar = build_lstm_pos_input(states, self.config.h, self.config.mode, gamma)?;
        self.predict(&xbar)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        let mut v: Vec<&mut Param<f64>> = Vec::new();
        for l in &mut self.lstm {
            v.extend(l.params_mut());
        }
        for c in &mut self.conv {
            v.extend(c.params_mut());
        }
        v.extend(self.head.params_mut());
        v.extend(self.out.params_mut());
        v
    }

    pub fn params(&self) -> Vec<&Param<f64>> {
        let mut v: Vec<&Param<f64>> = Vec::new();
        for l in &self.lstm {
            v.extend(l.params());
        }
        for c in &self.conv {
            v.extend(c.params());
        }
        v.extend(self.head.params());
        v.extend(self.out.params());
        v
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::GammaConfig;
    use crate::nn::{grad_check, rmse_loss};

    fn config(mode: InputMode, a: usize, m: usize, h: usize, dropout: f64) -> LstmPosConfig {
        LstmPosConfig {
            mode,
            a,
            b: 2,
            m,
            h,
            dropout,
            seed: 5,
            ..LstmPosConfig::default()
        }
    }

    fn phi(cfg: LstmPosConfig, n: usize) -> LstmPosNet {
        let d = cfg.mode.width(n);
        let mask = FeatureMask::custom("t", (0..n).collect()).unwrap();
        let labels = LabelScaler {
            center: [0.0, 0.33, -0.08],
            scale: 0.2,
        };
        LstmPosNet::new(cfg, mask, NormStats::identity(d), labels).unwrap()
    }

    fn windows(batch: usize, h: usize, d: usize) -> Vec<f64> {
        (0..batch * h * d)
            .map(|i| (i as f64 * 0.29).sin() * 1.3)
            .collect()
    }

    #[test]
    fn parameter_counts() {
        let full = LstmPosConfig {
            mode: InputMode::Concat,
            a: 256,
            b: 2,
            m: 64,
            ..LstmPosConfig::default()
        };
        // 4m(m+d)+4m per layer, convs 1→8→8→4 (k=3), head 4m→14→3.
        let expect = (4 * 64 * (64 + 21) + 256)
            + (4 * 64 * 128 + 256)
            + (24 + 8)
            + (192 + 8)
            + (96 + 4)
            + (256 * 14 + 14)
            + (14 * 3 + 3);
        assert_eq!(full.param_count(18), expect);
        assert_eq!(expect, 59_015);
        assert_ne!(expect, 42_291);
        let net = phi(config(InputMode::Concat, 3, 8, 5, 0.2), 18);
        assert_eq!(net.param_count(), net.config.param_count(18));
        assert_eq!(
            net.param_count(),
            config(InputMode::Concat, 99, 8, 5, 0.2).param_count(18)
        );
    }

    #[test]
    fn input_widths_per_mode() {
        let mask = FeatureMask::named("all").unwrap();
        let gamma = GammaNet::new(
            GammaConfig {
                hidden: vec![4],
                seed: 1,
            },
            mask,
            NormStats::identity(18),
            LabelScaler {
                center: [0.0; 3],
                scale: 1.0,
            },
        )
        .unwrap();
        let states: Vec<f64> = (0..4 * 18).map(|i| i as f64 * 0.01).collect();
        let pos = build_lstm_pos_input(&states, 4, InputMode::PosOnly, Some(&gamma)).unwrap();
        assert_eq!(pos.len(), 4 * 3);
        let cat = build_lstm_pos_input(&states, 4, InputMode::Concat, Some(&gamma)).unwrap();
        assert_eq!(cat.len(), 4 * 21);
        assert_eq!(&cat[21..39], &states[18..36]);
        assert_eq!(&cat[39..42], &pos[3..6]);
        let raw = build_lstm_pos_input(&states, 4, InputMode::RawOnly, None).unwrap();
        assert_eq!(raw, states);
        assert!(matches!(
            build_lstm_pos_input(&states, 4, InputMode::PosOnly, None),
            Err(ModelError::MissingGamma)
        ));
    }

    #[test]
    fn zero_dropout_is_invariant_to_width() {
        let one = phi(config(InputMode::Concat, 1, 6, 4, 0.0), 5);
        let mut many = phi(config(InputMode::Concat, 4, 6, 4, 0.0), 5);
        for (p, q) in many.params_mut().into_iter().zip(one.params()) {
            p.value = q.value.clone();
        }
        let x = windows(3, 4, 8);
        let (a, _) = one.forward_train(&x, 3, 1);
        let (b, _) = many.forward_train(&x, 3, 2);
        // Four identical rows average exactly.
        assert_eq!(a, b);
        assert_eq!(a, one.forward_normalized(&x, 3));
        assert_eq!(many.forward_normalized(&x, 3), a);
    }

    #[test]
    fn dropout_rows_differ() {
        let net = phi(config(InputMode::RawOnly, 2, 6, 4, 0.5), 5);
        let x = windows(1, 4, 5);
        let (_, cache) = net.forward_train(&x, 1, 9);
        let mask = &cache.masks[0];
        assert_ne!(&mask[..20], &mask[20..]);
    }

    #[test]
    fn full_graph_gradient_check() {
        let (a, m, h, n) = (4, 8, 5, 4);
        let mut net = phi(config(InputMode::Concat, a, m, h, 0.25), n);
        let batch = 2;
        let x = windows(batch, h, n + 3);
        let y = [0.3, -0.2, 0.5, -0.7, 0.1, 0.4];
        let (out, cache) = net.forward_train(&x, batch, 77);
        let (_, g) = rmse_loss(&out, &y).unwrap();
        net.backward(&cache, &g);
        let analytic: Vec<f64> = net
            .params()
            .iter()
            .flat_map(|p| p.grad.data.clone())
            .collect();
        let flat: Vec<f64> = net
            .params()
            .iter()
            .flat_map(|p| p.value.data.clone())
            .collect();
        let mut probe = net.clone();
        let err = grad_check(
            |v| {
                let mut off = 0;
                for p in probe.params_mut() {
                    let k = p.len();
                    p.value.data.copy_from_slice(&v[off..off + k]);
                    off += k;
                }
                rmse_loss(&probe.forward_train(&x, batch, 77).0, &y)
                    .unwrap()
                    .0
            },
            &flat,
            &analytic,
            1e-5,
        );
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn batch_inference_equals_single_bitwise() {
        let net = phi(config(InputMode::PosOnly, 3, 8, 6, 0.3), 18);
        let x = windows(4, 6, 3);
        let batch = net.predict_batch(&x, 4).unwrap();
        for s in 0..4 {
            let p = net.predict(&x[s * 18..(s + 1) * 18]).unwrap();
            assert_eq!(&batch[s * 3..s * 3 + 3], &p);
        }
    }

    #[test]
    fn wrong_window_length_rejected() {
        let net = phi(config(InputMode::PosOnly, 1, 4, 6, 0.0), 18);
        assert!(matches!(
            net.predict(&[0.0; 15]),
            Err(ModelError::WindowLength {
                expected: 6,
                found: 5
            })
        ));
    }

    #[test]
    fn save_load_and_architecture_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.bin");
        let net = phi(config(InputMode::Concat, 2, 5, 4, 0.1), 6);
        net.save(&path).unwrap();
        let back = LstmPosNet::load(&path).unwrap();
        let x = windows(1, 4, 9);
        assert_eq!(back.predict(&x).unwrap(), net.predict(&x).unwrap());
        assert!(matches!(
            GammaNet::load(&path),
            Err(ModelError::ArchitectureMismatch { .. })
        ));
    }
}
