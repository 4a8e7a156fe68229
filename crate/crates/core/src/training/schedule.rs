use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CurriculumConfig, Learner, TrainConfig, TrainData, TrainError};
use crate::nn::{clip_grad_norm, Adam, AdamConfig, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based epoch counter across all stages.
    pub epoch: usize,
    /// 1-based curriculum stage (always 1 for standard training).
    pub stage: usize,
    /// Mean normalised training RMSE over the epoch's batches.
    pub train_loss: f64,
    /// RMS wrist distance (mm) over the stage set, intermediate stages only.
    pub stage_mm: Option<f64>,
    /// RMS distance (mm) on the validation set, when one is given.
    pub val_mm: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were kept (best validation), if validated.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl History {
    /// One `epoch=… stage=… loss=…` line per epoch.
    pub fn to_log(&self) -> String {
        let mut s = String::new();
        for r in &self.epochs {
            write!(
                s,
                "epoch={} stage={} loss={:.6}",
                r.epoch, r.stage, r.train_loss
            )
            .unwrap();
            if let Some(v) = r.stage_mm {
                write!(s, " stage_mm={v:.3}").unwrap();
            }
            if let Some(v) = r.val_mm {
                write!(s, " val_mm={v:.3}").unwrap();
            }
            s.push('\n');
        }
        s
    }
}

/// Segment (0-based) of timeline position `pos` out of `count` when the
/// timeline is cut into `segments` equal parts.
pub fn curriculum_segment(pos: usize, count: usize, segments: usize) -> usize {
    if count == 0 {
        return 0;
    }
    (pos * segments / count).min(segments - 1)
}

pub(crate) fn rms_mm<L: Learner>(learner: &L, data: &L::Data, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let sq = learner.squared_errors(data, idx);
    (sq.iter().sum::<f64>() / sq.len() as f64).sqrt() * 1000.0
}

struct State {
    rng: ChaCha8Rng,
    adam: Adam<f64>,
    epoch: usize,
    history: History,
}

impl State {
    fn new(cfg: &TrainConfig) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            adam: Adam::new(AdamConfig {
                learning_rate: cfg.learning_rate,
                ..AdamConfig::default()
            }),
            epoch: 0,
            history: History::default(),
        }
    }

    fn run_epoch<L: Learner>(
        &mut self,
        learner: &mut L,
        data: &L::Data,
        items: &[usize],
        cfg: &TrainConfig,
    ) -> Result<f64, TrainError> {
        self.epoch += 1;
        let mut order = items.to_vec();
        order.shuffle(&mut self.rng);
        if let Some(n) = cfg.samples_per_epoch {
            order.truncate(n);
        }
        let (mut sum, mut count) = (0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let seed = self.rng.next_u64();
            let loss = learner.train_batch(data, batch, seed);
            if !loss.is_finite() {
                return Err(TrainError::Diverged {
                    epoch: self.epoch,
                    loss,
                });
            }
            let mut params = learner.params_mut();
            if let Some(c) = cfg.grad_clip {
                clip_grad_norm(&mut params, c);
            }
            self.adam.update(&mut params)?;
            sum += loss * batch.len() as f64;
            count += batch.len();
        }
        Ok(if count > 0 { sum / count as f64 } else { 0.0 })
    }

    fn record(&mut self, r: EpochRecord) {
        log::debug!(
            "epoch {} stage {} loss {:.6} stage_mm {:?} val_mm {:?}",
            r.epoch,
            r.stage,
            r.train_loss,
            r.stage_mm,
            r.val_mm
        );
        self.history.epochs.push(r);
    }

    /// Full-set phase: `cfg.epochs` epochs with best-validation snapshot and
    /// optional early stopping.
    fn final_phase<L: Learner>(
        &mut self,
        learner: &mut L,
        train: &L::Data,
        val: Option<&L::Data>,
        items: &[usize],
        cfg: &TrainConfig,
        stage: usize,
    ) -> Result<(), TrainError> {
        let val_idx: Vec<usize> = val.map(|v| (0..v.len()).collect()).unwrap_or_default();
        let mut best: Option<(f64, Vec<Tensor<f64>>)> = None;
        let mut stale = 0;
        for _ in 0..cfg.epochs {
            let train_loss = self.run_epoch(learner, train, items, cfg)?;
            let val_mm = val.map(|v| rms_mm(learner, v, &val_idx));
            self.record(EpochRecord {
                epoch: self.epoch,
                stage,
                train_loss,
                stage_mm: None,
                val_mm,
            });
            if let Some(vm) = val_mm {
                if !vm.is_finite() {
                    return Err(TrainError::Diverged {
                        epoch: self.epoch,
                        loss: vm,
                    });
                }
                if best.as_ref().is_none_or(|(b, _)| vm < *b) {
                    best = Some((
                        vm,
                        learner.params().iter().map(|p| p.value.clone()).collect(),
                    ));
                    self.history.best_epoch = Some(self.epoch);
                    stale = 0;
                } else {
                    stale += 1;
                    if cfg.patience > 0 && stale >= cfg.patience {
                        self.history.stopped_early = true;
                        break;
                    }
                }
            }
        }
        if let Some((_, snapshot)) = best {
            for (p, v) in learner.params_mut().into_iter().zip(snapshot) {
                p.value = v;
            }
        }
        Ok(())
    }
}

/// Shuffled mini-batch Adam on the full training set. With a validation
/// set, the weights of the best validation epoch are restored at the end.
pub fn train_standard<L: Learner>(
    learner: &mut L,
    train: &L::Data,
    val: Option<&L::Data>,
    cfg: &TrainConfig,
) -> Result<History, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut st = State::new(cfg);
    let items: Vec<usize> = (0..train.len()).collect();
    st.final_phase(learner, train, val, &items, cfg, 1)?;
    Ok(st.history)
}

/// Reverse curriculum: each item's episode timeline is cut into
/// `segments` parts and stage k trains on parts 1..=k, earliest first.
/// Intermediate stages run until the RMS stage error drops below the
/// threshold; the last stage is a standard run on all items, after which
/// the same threshold must hold on the whole training set.
pub fn train_curriculum<L: Learner>(
    learner: &mut L,
    train: &L::Data,
    val: Option<&L::Data>,
    cc: &CurriculumConfig,
    tc: &TrainConfig,
) -> Result<History, TrainError> {
    cc.validate()?;
    tc.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let seg: Vec<usize> = (0..train.len())
        .map(|i| {
            let (pos, count) = train.timeline(i);
            curriculum_segment(pos, count, cc.segments)
        })
        .collect();
    let mut st = State::new(tc);
    for stage in 1..cc.segments {
        let items: Vec<usize> = (0..train.len()).filter(|&i| seg[i] < stage).collect();
        if items.is_empty() {
            continue;
        }
        let mut spent = 0;
        loop {
            let train_loss = st.run_epoch(learner, train, &items, tc)?;
            spent += 1;
            let stage_mm = rms_mm(learner, train, &items);
            st.record(EpochRecord {
                epoch: st.epoch,
                stage,
                train_loss,
                stage_mm: Some(stage_mm),
                val_mm: None,
            });
            if stage_mm < cc.threshold_mm {
                break;
            }
            if spent >= cc.max_epochs_per_stage {
                return Err(TrainError::Disqualified {
                    stage,
                    epochs: spent,
                    loss_mm: stage_mm,
                    history: st.history,
                });
            }
        }
    }
    let items: Vec<usize> = (0..train.len()).collect();
    st.final_phase(learner, train, val, &items, tc, cc.segments)?;
    let final_mm = rms_mm(learner, train, &items);
    if !(final_mm < cc.threshold_mm) {
        let epochs = st
            .history
            .epochs
            .iter()
            .filter(|r| r.stage == cc.segments)
            .count();
        return Err(TrainError::Disqualified {
            stage: cc.segments,
            epochs,
            loss_mm: final_mm,
            history: st.history,
        });
    }
    Ok(st.history)
}
