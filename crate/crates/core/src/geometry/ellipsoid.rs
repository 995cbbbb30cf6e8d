use nalgebra::{Matrix3, SymmetricEigen};

use super::{GeometryError, Vec3};

/// Smallest semi-axis a fitted ellipsoid may have, in meters.
pub const EPS_AXIS: f64 = 1e-3;
/// Largest semi-axis a fitted ellipsoid may have, in meters.
pub const MAX_AXIS: f64 = 10.0;
/// Default containment slack for [`Ellipsoid::contains`].
pub const DEFAULT_SLACK: f64 = 1e-6;

const CM3_PER_M3: f64 = 1e6;

/// The solid `{x : (x - center)ᵀ · shape · (x - center) ≤ 1}`.
///
/// The shape matrix is stored as its six upper-triangular entries in the order
/// `a11 a12 a13 a22 a23 a33`, so symmetry holds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    center: Vec3,
    shape: [f64; 6],
}

impl Ellipsoid {
    /// Builds an ellipsoid from a center and a symmetric positive definite
    /// shape matrix. Only the upper triangle of `shape` is read.
    pub fn new(center: Vec3, shape: &Matrix3<f64>) -> Result<Self, GeometryError> {
        let upper = [
            shape[(0, 0)],
            shape[(0, 1)],
            shape[(0, 2)],
            shape[(1, 1)],
            shape[(1, 2)],
            shape[(2, 2)],
        ];
        Self::from_upper(center, upper)
    }

    /// Builds an ellipsoid from the six upper-triangular shape entries
    /// `a11 a12 a13 a22 a23 a33`.
    pub fn from_upper(center: Vec3, upper: [f64; 6]) -> Result<Self, GeometryError> {
        if !center.iter().all(|v| v.is_finite()) || !upper.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFiniteInput);
        }
        let e = Self {
            center,
            shape: upper,
        };
        if e.shape_matrix().cholesky().is_none() {
            return Err(GeometryError::NotPositiveDefinite);
        }
        Ok(e)
    }

    pub fn ball(center: Vec3, radius: f64) -> Result<Self, GeometryError> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::NotPositiveDefinite);
        }
        let s = 1.0 / (radius * radius);
        Self::from_upper(center, [s, 0.0, 0.0, s, 0.0, s])
    }

    /// Ellipsoid whose principal axes are the columns of `rotation` with the
    /// given semi-axis lengths (meters).
    pub fn from_axes(
        center: Vec3,
        rotation: &Matrix3<f64>,
        semi_axes: Vec3,
    ) -> Result<Self, GeometryError> {
        if semi_axes.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(GeometryError::NotPositiveDefinite);
        }
        let diag = Matrix3::from_diagonal(&semi_axes.map(|a| 1.0 / (a * a)));
        Self::new(center, &(rotation * diag * rotation.transpose()))
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    /// Upper-triangular shape entries `a11 a12 a13 a22 a23 a33`.
    pub fn shape_upper(&self) -> [f64; 6] {
        self.shape
    }

    pub fn shape_matrix(&self) -> Matrix3<f64> {
        let [a11, a12, a13, a22, a23, a33] = self.shape;
        Matrix3::new(a11, a12, a13, a12, a22, a23, a13, a23, a33)
    }

    /// Same shape, center moved by `offset`.
    pub fn translated(&self, offset: &Vec3) -> Self {
        Self {
            center: self.center + offset,
            shape: self.shape,
        }
    }

    /// `(p - center)ᵀ · shape · (p - center)`.
    #[inline]
    pub fn quadratic_form(&self, p: &Vec3) -> f64 {
        let d = p - self.center;
        let [a11, a12, a13, a22, a23, a33] = self.shape;
        a11 * d.x * d.x
            + a22 * d.y * d.y
            + a33 * d.z * d.z
            + 2.0 * (a12 * d.x * d.y + a13 * d.x * d.z + a23 * d.y * d.z)
    }

    /// True iff the quadratic form at `p` is at most `1 + slack`.
    pub fn contains(&self, p: &Vec3, slack: f64) -> Result<bool, GeometryError> {
        if !p.iter().all(|v| v.is_finite()) || !slack.is_finite() {
            return Err(GeometryError::NonFiniteInput);
        }
        Ok(self.quadratic_form(p) <= 1.0 + slack)
    }

    /// Principal axes: semi-axis lengths in descending order and the matching
    /// unit directions as matrix columns.
    pub fn principal_axes(&self) -> (Vec3, Matrix3<f64>) {
        let eig = SymmetricEigen::new(self.shape_matrix());
        let mut order = [0usize, 1, 2];
        // Largest semi-axis belongs to the smallest eigenvalue.
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let axes = Vec3::from_fn(|i, _| 1.0 / eig.eigenvalues[order[i]].sqrt());
        let rot = Matrix3::from_columns(&[
            eig.eigenvectors.column(order[0]).into_owned(),
            eig.eigenvectors.column(order[1]).into_owned(),
            eig.eigenvectors.column(order[2]).into_owned(),
        ]);
        (axes, rot)
    }

    pub fn semi_axes(&self) -> Vec3 {
        self.principal_axes().0
    }

    /// Largest eigenvalue of the shape matrix (1 / shortest semi-axis²).
    pub fn max_eigenvalue(&self) -> f64 {
        let a = self.semi_axes();
        1.0 / (a.z * a.z)
    }

    /// Volume in cubic centimeters, `(4/3)·π·a·b·c·10⁶`.
    ///
    /// The product of the semi-axes equals `1/√det(shape)`, which avoids an
    /// eigen-decomposition on the hot evaluation path.
    pub fn volume_cm3(&self) -> f64 {
        let det = self.shape_matrix().determinant();
        4.0 / 3.0 * std::f64::consts::PI / det.sqrt() * CM3_PER_M3
    }

    /// Half-widths of the tightest axis-aligned box around the ellipsoid:
    /// `h[i] = √((shape⁻¹)[i][i])`.
    pub fn axis_aligned_extents(&self) -> Result<Vec3, GeometryError> {
        let inv = self
            .shape_matrix()
            .try_inverse()
            .ok_or(GeometryError::SingularShape)?;
        let h = Vec3::new(inv[(0, 0)], inv[(1, 1)], inv[(2, 2)]);
        if h.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GeometryError::SingularShape);
        }
        Ok(h.map(f64::sqrt))
    }

    /// True when every off-diagonal shape entry is zero.
    pub fn is_axis_aligned(&self) -> bool {
        self.shape[1] == 0.0 && self.shape[2] == 0.0 && self.shape[4] == 0.0
    }

    /// Clamps every semi-axis into `[EPS_AXIS, MAX_AXIS]`. Returns the new
    /// ellipsoid and whether anything changed.
    pub fn clamp_axes(&self) -> (Self, bool) {
        let (axes, rot) = self.principal_axes();
        let clamped = axes.map(|a| a.clamp(EPS_AXIS, MAX_AXIS));
        let changed = axes
            .iter()
            .zip(clamped.iter())
            .any(|(a, c)| (a - c).abs() > 1e-12 * c);
        if !changed {
            return (*self, false);
        }
        let diag = Matrix3::from_diagonal(&clamped.map(|a| 1.0 / (a * a)));
        let shape = rot * diag * rot.transpose();
        let e = Self {
            center: self.center,
            shape: [
                shape[(0, 0)],
                0.5 * (shape[(0, 1)] + shape[(1, 0)]),
                0.5 * (shape[(0, 2)] + shape[(2, 0)]),
                shape[(1, 1)],
                0.5 * (shape[(1, 2)] + shape[(2, 1)]),
                shape[(2, 2)],
            ],
        };
        (e, true)
    }
}
