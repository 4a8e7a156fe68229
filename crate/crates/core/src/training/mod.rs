//! Training loops (standard and reverse curriculum), evaluation reports and
//! the ablation / window-length sweep drivers.

mod data;
mod eval;
mod experiment;
mod learner;
mod report;
mod schedule;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::models::ModelError;
use crate::nn::NnError;

pub use data::{GammaData, PhiData};
pub use eval::{
    episode_targets, evaluate_position, evaluate_target, mean_distance_to_centroid, CurvePoint,
    EvalReport, AGGREGATION,
};
pub use experiment::{
    default_ablation_cells, fit_gamma, fit_phi, run_ablation, run_h_sweep, AblationCell,
    AblationRow, GammaSetup, HSweepRow, PhiSetup,
};
pub use learner::{Learner, TrainData};
pub use report::{
    write_ablation_csv, write_error_vs_time_csv, write_h_sweep_csv, write_heatmap_csv,
};
pub use schedule::{curriculum_segment, train_curriculum, train_standard, EpochRecord, History};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("disqualified at curriculum stage {stage} after {epochs} epochs: stage loss {loss_mm:.2} mm")]
    Disqualified {
        stage: usize,
        epochs: usize,
        loss_mm: f64,
        history: History,
    },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    /// Optional max-norm gradient clip.
    pub grad_clip: Option<f64>,
    /// Random subset drawn each epoch instead of the full set.
    pub samples_per_epoch: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            patience: 0,
            grad_clip: None,
            samples_per_epoch: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig(
                "batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(TrainError::InvalidConfig(
                "grad_clip must be positive".into(),
            ));
        }
        if self.samples_per_epoch == Some(0) {
            return Err(TrainError::InvalidConfig(
                "samples_per_epoch must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurriculumConfig {
    /// Number of time segments N_cl.
    pub segments: usize,
    /// Stage threshold γ_cl (mm, root-mean-square wrist distance).
    pub threshold_mm: f64,
    /// Epoch budget of each intermediate stage.
    pub max_epochs_per_stage: usize,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            segments: 10,
            threshold_mm: 58.0,
            max_epochs_per_stage: 200,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.segments == 0 {
            return Err(TrainError::InvalidConfig(
                "curriculum needs at least one segment".into(),
            ));
        }
        if self.threshold_mm.is_nan() || self.threshold_mm < 0.0 {
            return Err(TrainError::InvalidConfig(
                "threshold_mm must be non-negative".into(),
            ));
        }
        Ok(())
    }
}
