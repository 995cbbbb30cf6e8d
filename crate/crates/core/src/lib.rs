//! Binned-ellipsoid prediction of where a VR headset will be over the next
//! few frames.
//!
//! Training quantizes each per-frame movement into a bin and fits, per bin, the
//! minimum-volume ellipsoid around the future offsets that followed it. A query
//! looks up the bin of the latest movement and returns that ellipsoid placed at
//! the current position.

pub mod eval;
pub mod geometry;
pub mod model;
pub mod prefetch;
pub mod traces;

pub use geometry::{Ellipsoid, FitReport, GeometryError, Vec3};
pub use model::{BinEntry, BinId, BinSizes, ModelConfig, ModelError, Prediction, TrainedModel};
pub use traces::{PoseSample, Trace, TraceError};
