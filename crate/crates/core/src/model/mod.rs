//! The binned-ellipsoid model: movement binning, training, queries, and the
//! on-disk format.

mod binning;
mod persist;
mod train;

pub use binning::{bin_id, BinId, BinSizes, MAX_BIN_INDEX, MAX_BIN_SIZE, MIN_BIN_SIZE};
pub use persist::{load_model, save_model, FORMAT_VERSION};
pub use train::{
    extract_training_pairs, predict, train, BinEntry, ModelConfig, Prediction, TrainedModel,
    TrainingMeta, RATE_TOLERANCE,
};

use crate::geometry::GeometryError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("movement exceeds the bin index range")]
    BinOverflow,
    #[error("trace too short")]
    TooShort,
    #[error("no trace with at least 3 samples")]
    NoTrainingData,
    #[error("trace rate {found} Hz does not match model rate {expected} Hz")]
    RateMismatch { expected: f64, found: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ellipsoid fit failed: {0}")]
    Geometry(#[from] GeometryError),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u64),
    #[error("corrupt model file at line {0}")]
    CorruptModel(usize),
    #[error("read failed: {0}")]
    Io(String),
}
