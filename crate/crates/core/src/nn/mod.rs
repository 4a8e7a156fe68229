//! Small deterministic neural-network engine: dense, LSTM and 1-D
//! convolution layers with hand-written backward passes, dropout, RMSE loss,
//! Adam and finite-difference gradient checking.
//!
//! All batched kernels reduce in a fixed order, so a batch forward pass is
//! bit-identical to running its samples one at a time.

mod activation;
mod adam;
mod conv;
mod dense;
mod dropout;
mod grad_check;
mod init;
pub mod kernels;
mod loss;
mod lstm;
mod tensor;
mod weights;

use thiserror::Error;

pub use activation::{relu_backward, relu_forward, sigmoid};
pub use adam::{clip_grad_norm, Adam, AdamConfig};
pub use conv::{conv1d_backward, conv1d_forward, Conv1d};
pub use dense::{dense_backward, dense_forward, Dense};
pub use dropout::{dropout, dropout_mask};
pub use grad_check::{grad_check, relative_error};
pub use init::glorot_uniform;
pub use loss::rmse_loss;
pub use lstm::{lstm_cell_step, Lstm, LstmCache, LstmStepCache};
pub use tensor::{Param, Tensor};
pub use weights::{WeightBlock, WeightFile, WEIGHT_MAGIC, WEIGHT_VERSION};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("dropout rate {0} outside [0, 1)")]
    InvalidRate(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("convolution kernel length {0} must be odd")]
    EvenKernel(usize),
    #[error("corrupt weight file: {0}")]
    CorruptFile(String),
    #[error("unsupported weight file version {0}")]
    Version(u32),
    #[error("weight file checksum mismatch")]
    Checksum,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(
    context: &'static str,
    expected: usize,
    found: usize,
) -> Result<(), NnError> {
    if expected == found {
        Ok(())
    } else {
        Err(NnError::ShapeMismatch {
            context,
            expected,
            found,
        })
    }
}
