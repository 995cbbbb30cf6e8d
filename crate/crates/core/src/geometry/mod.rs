//! Ellipsoids: construction, containment, volume, and the minimum-volume
//! enclosing fit used for every prediction volume.

mod ellipsoid;
mod mvee;

pub use ellipsoid::{Ellipsoid, DEFAULT_SLACK, EPS_AXIS, MAX_AXIS};
pub use mvee::{
    fit_enclosing_ellipsoid, fit_source, FitReport, PointSource, DEFAULT_MAX_ITERATIONS,
    DEFAULT_TOLERANCE,
};

/// 3-vector in meters.
pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("no points to enclose")]
    EmptyInput,
    #[error("non-finite coordinate")]
    NonFiniteInput,
    #[error("shape matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("shape matrix is singular")]
    SingularShape,
}
