//! The wrist-position network Γ and the target predictor LSTM-Pos (Φ).

mod gamma;
mod lstm_pos;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::nn::NnError;

pub use gamma::{GammaCache, GammaConfig, GammaNet};
pub use lstm_pos::{build_lstm_pos_input, LstmPosCache, LstmPosConfig, LstmPosNet};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input width {found} does not match the model's {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("window has {found} states, the model expects H={expected}")]
    WindowLength { expected: usize, found: usize },
    #[error("feature mask `{found}` does not match the model's `{expected}`")]
    MaskMismatch { expected: String, found: String },
    #[error("this input mode needs a position network")]
    MissingGamma,
    #[error("weight file holds a `{found}` model, expected `{expected}`")]
    ArchitectureMismatch { expected: String, found: String },
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// What the first LSTM layer consumes at each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// Estimated wrist positions only (width 3).
    PosOnly,
    /// Raw masked state followed by the estimated wrist position (width n+3).
    Concat,
    /// Raw masked state only (width n); the plain LSTM baseline.
    RawOnly,
}

impl InputMode {
    pub const ALL: [InputMode; 3] = [InputMode::PosOnly, InputMode::Concat, InputMode::RawOnly];

    pub fn width(self, n: usize) -> usize {
        match self {
            InputMode::PosOnly => 3,
            InputMode::Concat => n + 3,
            InputMode::RawOnly => n,
        }
    }

    pub fn needs_gamma(self) -> bool {
        self != InputMode::RawOnly
    }

    pub fn name(self) -> &'static str {
        match self {
            InputMode::PosOnly => "pos-only",
            InputMode::Concat => "concat",
            InputMode::RawOnly => "raw-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::fmt::Display for InputMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Weights and biases of a dense layer.
pub fn dense_param_count(inp: usize, out: usize) -> usize {
    inp * out + out
}

pub(crate) fn corrupt(e: NnError) -> ModelError {
    match e {
        NnError::CorruptFile(m) => ModelError::CorruptFile(m),
        NnError::Checksum => ModelError::CorruptFile("checksum mismatch".into()),
        NnError::Version(v) => ModelError::CorruptFile(format!("unsupported version {v}")),
        other => ModelError::Nn(other),
    }
}

pub(crate) fn header_kind(header: &serde_json::Value) -> String {
    header
        .get("kind")
        .and_then(|k| k.as_str())
        .unwrap_or("unknown")
        .to_string()
}
