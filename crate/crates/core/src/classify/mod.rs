//! Multi-label degradation classifier: residual MLP head over the feature
//! vector, sigmoid or softmax outputs, momentum-SGD and Adam training.

mod activation;
mod io;
mod model;
mod optim;
mod train;

use std::path::PathBuf;

pub use activation::{sigmoid, softmax, LogitVector, OutputMode, ProbabilityError, ProbabilityVector};
pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use model::{ResidualHead, DEFAULT_HIDDEN, INPUTS};
pub use optim::{adam_step, sgd_momentum_step, OptimError, OptimizerKind, OptimizerState};
pub use train::{
    featurize, is_correct, lr_sweep, momentum_sweep, train, train_on_examples, EpochRecord, Example, Hyperparams,
    SweepReport, SweepRow, TrainingHistory, SWEEP_LEARNING_RATES, SWEEP_MOMENTA,
};

use crate::features::TooSmall;
use crate::synth::SplitError;

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("sweep needs at least one value")]
    EmptyRateSet,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("bad model magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("model format version {found} (supported: {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("model file truncated: need {expected} bytes, have {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("incompatible model: {0}")]
    Incompatible(String),
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error(transparent)]
    Features(#[from] TooSmall),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Optim(#[from] OptimError),
}
