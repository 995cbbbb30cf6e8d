//! Minimum-volume enclosing ellipsoid.
//!
//! Khachiyan's barycentric ascent in the lifted `(d+1)`-dimensional space,
//! with Todd–Yildirim away steps so that the weights of interior points can
//! drop back to zero. The points are first whitened (centered and scaled along
//! their principal directions); the enclosing ellipsoid is affine-equivariant,
//! so the fit is done in the well-conditioned frame and mapped back exactly.
//!
//! Large clouds are handled with an active set: the solver runs on a small
//! working set, the full cloud is scanned for points violating the optimality
//! bound, and the worst offenders are added until none remain. The stopping
//! rule is the same as running the ascent over every point.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{Matrix3, SymmetricEigen};

use super::ellipsoid::{Ellipsoid, EPS_AXIS};
use super::{GeometryError, Vec3};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 200_000;

/// Clouds up to this size are fitted directly without an active set.
const DIRECT_LIMIT: usize = 4096;
/// Violators added to the working set per scan.
const VIOLATORS_PER_ROUND: usize = 256;
const MAX_ROUNDS: usize = 200;
/// Inverse refresh period for the rank-one updates.
const REFRESH_EVERY: usize = 64;
/// Principal spreads below `REL_RANK · largest` (or `ABS_RANK` meters) are
/// treated as null directions. Eigenvalue round-off is about 1e-16 of the
/// largest, i.e. 1e-8 in spread, so the relative floor has to sit above that.
const REL_RANK: f64 = 1e-6;
const ABS_RANK: f64 = 1e-12;

/// Diagnostics from [`fit_enclosing_ellipsoid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub converged: bool,
    pub iterations: usize,
    /// Final optimality gap `max_j M_j − (d+1)` over all input points.
    pub max_residual: f64,
    /// Set when the point cloud was rank deficient or a semi-axis was clamped.
    pub regularized: bool,
}

/// Anything that can stream 3D points. Fitting makes several passes, so the
/// same sequence must be produced on every call.
pub trait PointSource {
    fn for_each_point(&self, f: &mut dyn FnMut(Vec3));
}

impl PointSource for [Vec3] {
    fn for_each_point(&self, f: &mut dyn FnMut(Vec3)) {
        for p in self {
            f(*p);
        }
    }
}

impl PointSource for Vec<Vec3> {
    fn for_each_point(&self, f: &mut dyn FnMut(Vec3)) {
        self.as_slice().for_each_point(f)
    }
}

/// Fits the minimum-volume ellipsoid enclosing `points`.
///
/// Every point ends up with quadratic form at most `1 + 10·tolerance`; when the
/// report says `converged`, the volume is within `(1+tolerance)^3` of minimal.
/// Rank-deficient clouds get [`EPS_AXIS`] semi-axes along their null
/// directions, and every semi-axis is clamped into `[EPS_AXIS, MAX_AXIS]`.
pub fn fit_enclosing_ellipsoid(
    points: &[Vec3],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Ellipsoid, FitReport), GeometryError> {
    fit_source(points, tolerance, max_iterations)
}

/// [`fit_enclosing_ellipsoid`] over a streamed point source.
pub fn fit_source<S: PointSource + ?Sized>(
    source: &S,
    tolerance: f64,
    max_iterations: usize,
) -> Result<(Ellipsoid, FitReport), GeometryError> {
    let frame = Frame::measure(source)?;
    let k = frame.rank;

    let (center_y, shape_y, iterations, gap) = if k == 0 {
        (Vec::new(), Vec::new(), 0, 0.0)
    } else if frame.count <= DIRECT_LIMIT {
        let mut ys = Vec::with_capacity(frame.count);
        source.for_each_point(&mut |p| ys.push(frame.whiten(&p)));
        let mut solver = Barycentric::new(k, &ys);
        let (iterations, _) = solver.run(tolerance, max_iterations);
        let (c, a) = solver.ellipsoid();
        let f_max = ys.iter().map(|y| form(&a, &c, y, k)).fold(0.0, f64::max);
        let a = scale_tight(a, f_max);
        (c, a, iterations, k as f64 * (f_max - 1.0))
    } else {
        fit_active_set(source, &frame, tolerance, max_iterations)
    };

    let (shape, center) = frame.unwhiten(&center_y, &shape_y);
    let raw = Ellipsoid::new(center, &shape)?;
    let (ellipsoid, clamped) = raw.clamp_axes();
    let residual = gap.max(0.0);
    let report = FitReport {
        converged: residual <= tolerance,
        iterations,
        max_residual: residual,
        regularized: k < 3 || clamped,
    };
    Ok((ellipsoid, report))
}

fn fit_active_set<S: PointSource + ?Sized>(
    source: &S,
    frame: &Frame,
    tolerance: f64,
    max_iterations: usize,
) -> (Vec<f64>, Vec<f64>, usize, f64) {
    let k = frame.rank;

    // Seed with the extreme points along a spread of directions.
    let dirs = seed_directions(k);
    let mut best: Vec<(f64, Vec<f64>)> = vec![(f64::NEG_INFINITY, Vec::new()); dirs.len()];
    source.for_each_point(&mut |p| {
        let y = frame.whiten(&p);
        for (slot, d) in best.iter_mut().zip(&dirs) {
            let s: f64 = y.iter().zip(d).map(|(a, b)| a * b).sum();
            if s > slot.0 {
                *slot = (s, y.clone());
            }
        }
    });
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for (_, y) in best {
        if !seeds.contains(&y) {
            seeds.push(y);
        }
    }

    let mut solver = Barycentric::new(k, &seeds);
    let mut used = 0;
    let threshold = 1.0 + tolerance / k as f64;
    let mut rounds = 0;
    loop {
        let (it, _) = solver.run(tolerance, max_iterations - used);
        used += it;
        let (c, a) = solver.ellipsoid();

        let mut f_max = 0.0f64;
        let mut violators: Vec<(f64, Vec<f64>)> = Vec::new();
        source.for_each_point(&mut |p| {
            let y = frame.whiten(&p);
            let f = form(&a, &c, &y, k);
            f_max = f_max.max(f);
            if f > threshold {
                violators.push((f, y));
                if violators.len() >= 8 * VIOLATORS_PER_ROUND {
                    keep_worst(&mut violators, VIOLATORS_PER_ROUND);
                }
            }
        });
        rounds += 1;

        if violators.is_empty() || used >= max_iterations || rounds >= MAX_ROUNDS {
            let gap = k as f64 * (f_max - 1.0);
            return (c, scale_tight(a, f_max), used, gap);
        }
        keep_worst(&mut violators, VIOLATORS_PER_ROUND);
        for (_, y) in violators {
            solver.push(&y);
        }
    }
}

fn keep_worst(v: &mut Vec<(f64, Vec<f64>)>, n: usize) {
    if v.len() > n {
        v.select_nth_unstable_by(n, |a, b| b.0.total_cmp(&a.0));
        v.truncate(n);
    }
}

/// Axis directions plus the diagonals of the `{-1,0,1}^k` grid, both signs.
fn seed_directions(k: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        let d: Vec<f64> = (0..k)
            .map(|_| {
                let v = (c % 3) as f64 - 1.0;
                c /= 3;
                v
            })
            .collect();
        if d.iter().any(|v| *v != 0.0) {
            dirs.push(d);
        }
    }
    dirs
}

/// Rescales so the largest quadratic form over the cloud is exactly one.
fn scale_tight(mut a: Vec<f64>, f_max: f64) -> Vec<f64> {
    if f_max > 0.0 && f_max.is_finite() {
        for v in &mut a {
            *v /= f_max;
        }
    }
    a
}

/// `(y − c)ᵀ A (y − c)` for a row-major `k×k` matrix `A`.
#[inline]
fn form(a: &[f64], c: &[f64], y: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..k {
        let di = y[i] - c[i];
        for j in 0..k {
            s += di * a[i * k + j] * (y[j] - c[j]);
        }
    }
    s
}

/// Whitening frame of a point cloud: mean, principal directions, spreads.
struct Frame {
    count: usize,
    mean: Vec3,
    /// Principal directions, largest spread first.
    dirs: Matrix3<f64>,
    spread: Vec3,
    rank: usize,
}

impl Frame {
    fn measure<S: PointSource + ?Sized>(source: &S) -> Result<Self, GeometryError> {
        let mut count = 0usize;
        let mut origin: Option<Vec3> = None;
        let mut sum = Vec3::zeros();
        let mut finite = true;
        source.for_each_point(&mut |p| {
            if !p.iter().all(|v| v.is_finite()) {
                finite = false;
                return;
            }
            let o = *origin.get_or_insert(p);
            sum += p - o;
            count += 1;
        });
        if !finite {
            return Err(GeometryError::NonFiniteInput);
        }
        let Some(origin) = origin else {
            return Err(GeometryError::EmptyInput);
        };
        let mean = origin + sum / count as f64;

        let mut scatter = Matrix3::zeros();
        source.for_each_point(&mut |p| {
            let d = p - mean;
            scatter += d * d.transpose();
        });
        scatter /= count as f64;

        let eig = SymmetricEigen::new(scatter);
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let dirs = Matrix3::from_columns(&[
            eig.eigenvectors.column(order[0]).into_owned(),
            eig.eigenvectors.column(order[1]).into_owned(),
            eig.eigenvectors.column(order[2]).into_owned(),
        ]);
        let spread = Vec3::from_fn(|i, _| eig.eigenvalues[order[i]].max(0.0).sqrt());
        let floor = (REL_RANK * spread[0]).max(ABS_RANK);
        let rank = spread.iter().filter(|s| **s > floor).count();
        Ok(Self {
            count,
            mean,
            dirs,
            spread,
            rank,
        })
    }

    fn whiten(&self, p: &Vec3) -> Vec<f64> {
        let d = p - self.mean;
        (0..self.rank)
            .map(|i| self.dirs.column(i).dot(&d) / self.spread[i])
            .collect()
    }

    /// Maps a whitened-frame ellipsoid back to world coordinates, filling null
    /// directions with `EPS_AXIS` semi-axes.
    fn unwhiten(&self, center_y: &[f64], shape_y: &[f64]) -> (Matrix3<f64>, Vec3) {
        let k = self.rank;
        let mut center = self.mean;
        for i in 0..k {
            center += self.dirs.column(i) * (center_y[i] * self.spread[i]);
        }
        let mut shape = Matrix3::zeros();
        for i in 0..k {
            let wi = self.dirs.column(i) / self.spread[i];
            for j in 0..k {
                let wj = self.dirs.column(j) / self.spread[j];
                shape += wi * wj.transpose() * shape_y[i * k + j];
            }
        }
        for i in k..3 {
            let v = self.dirs.column(i);
            shape += v * v.transpose() / (EPS_AXIS * EPS_AXIS);
        }
        (0.5 * (shape + shape.transpose()), center)
    }
}

type Mat4 = [[f64; 4]; 4];

/// Barycentric weights over lifted points `q = (y, 1)` with the inverse moment
/// matrix `X⁻¹ = (Σ uᵢ qᵢ qᵢᵀ)⁻¹` and `Mᵢ = qᵢᵀ X⁻¹ qᵢ` kept current by rank-one
/// updates.
struct Barycentric {
    k: usize,
    m: usize,
    q: Vec<[f64; 4]>,
    u: Vec<f64>,
    x_inv: Mat4,
    mvals: Vec<f64>,
    since_refresh: usize,
}

impl Barycentric {
    fn new(k: usize, ys: &[Vec<f64>]) -> Self {
        let q: Vec<[f64; 4]> = ys.iter().map(|y| lift(y, k)).collect();
        let n = q.len();
        let mut s = Self {
            k,
            m: k + 1,
            q,
            u: vec![1.0 / n as f64; n],
            x_inv: [[0.0; 4]; 4],
            mvals: vec![0.0; n],
            since_refresh: 0,
        };
        s.refresh();
        s
    }

    fn push(&mut self, y: &[f64]) {
        let q = lift(y, self.k);
        let mv = quad(&self.x_inv, &q, self.m);
        self.q.push(q);
        self.u.push(0.0);
        self.mvals.push(mv);
    }

    /// Recomputes `X⁻¹` and every `Mᵢ` from the weights. Returns false when the
    /// moment matrix is numerically singular.
    fn refresh(&mut self) -> bool {
        let m = self.m;
        let mut x = [[0.0; 4]; 4];
        for (q, &u) in self.q.iter().zip(&self.u) {
            if u == 0.0 {
                continue;
            }
            for i in 0..m {
                for j in 0..=i {
                    x[i][j] += u * q[i] * q[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                x[j][i] = x[i][j];
            }
        }
        let Some(inv) = spd_inverse(&x, m) else {
            return false;
        };
        self.x_inv = inv;
        for (mv, q) in self.mvals.iter_mut().zip(&self.q) {
            *mv = quad(&inv, q, m);
        }
        self.since_refresh = 0;
        true
    }

    /// Runs ascent/away steps until `max M − (d+1) ≤ tol` or the budget is
    /// spent. Returns iterations used and whether the bound was met.
    fn run(&mut self, tol: f64, budget: usize) -> (usize, bool) {
        let m = self.m as f64;
        let mut it = 0;
        if !self.refresh() {
            return (0, false);
        }
        loop {
            if self.since_refresh >= REFRESH_EVERY && !self.refresh() {
                return (it, false);
            }
            let (jp, mp) = argmax(&self.mvals);
            let gap = mp - m;
            if gap <= tol {
                // Confirm against freshly computed values before stopping.
                if self.since_refresh == 0 {
                    return (it, true);
                }
                if !self.refresh() {
                    return (it, false);
                }
                continue;
            }
            if it >= budget {
                return (it, false);
            }

            let away = self
                .u
                .iter()
                .zip(&self.mvals)
                .enumerate()
                .filter(|(_, (u, _))| **u > 0.0)
                .min_by(|a, b| a.1 .1.total_cmp(b.1 .1))
                .map(|(j, (_, mv))| (j, *mv));

            let mut stepped = false;
            if let Some((jm, mm)) = away {
                if m - mm > gap {
                    let uj = self.u[jm];
                    let floor = -uj / (1.0 - uj);
                    let alpha = if mm - 1.0 > 1e-12 {
                        ((mm - m) / (m * (mm - 1.0))).max(floor)
                    } else {
                        floor
                    };
                    stepped = self.step(jm, alpha, alpha == floor);
                }
            }
            if !stepped {
                let alpha = gap / (m * (mp - 1.0));
                self.step(jp, alpha, false);
            }
            it += 1;
        }
    }

    /// `u ← (1−α)·u + α·e_j`. Returns false if the step would make the moment
    /// matrix singular; nothing is changed in that case.
    fn step(&mut self, j: usize, alpha: f64, drop: bool) -> bool {
        let m = self.m;
        let beta = alpha / (1.0 - alpha);
        let mj = self.mvals[j];
        let denom = 1.0 + beta * mj;
        if !(denom > 1e-8) || !(1.0 - alpha > 0.0) {
            return false;
        }
        let qj = self.q[j];
        let mut w = [0.0; 4];
        for (r, wr) in w.iter_mut().enumerate().take(m) {
            *wr = (0..m).map(|c| self.x_inv[r][c] * qj[c]).sum();
        }
        let scale = 1.0 / (1.0 - alpha);
        let coef = beta / denom;
        for r in 0..m {
            for c in 0..m {
                self.x_inv[r][c] = (self.x_inv[r][c] - coef * w[r] * w[c]) * scale;
            }
        }
        for (mv, q) in self.mvals.iter_mut().zip(&self.q) {
            let d: f64 = (0..m).map(|c| q[c] * w[c]).sum();
            *mv = (*mv - coef * d * d) * scale;
        }
        for u in &mut self.u {
            *u *= 1.0 - alpha;
        }
        self.u[j] += alpha;
        if drop || self.u[j] < 0.0 {
            self.u[j] = 0.0;
        }
        self.since_refresh += 1;
        true
    }

    /// Center and shape (row-major `k×k`) of the current iterate:
    /// `c = Σ uᵢ yᵢ`, `A = (Σ uᵢ yᵢ yᵢᵀ − c cᵀ)⁻¹ / k`.
    fn ellipsoid(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.k;
        let mut c = vec![0.0; k];
        for (q, &u) in self.q.iter().zip(&self.u) {
            for i in 0..k {
                c[i] += u * q[i];
            }
        }
        let mut s = [[0.0; 4]; 4];
        for (q, &u) in self.q.iter().zip(&self.u) {
            if u == 0.0 {
                continue;
            }
            for i in 0..k {
                for j in 0..k {
                    s[i][j] += u * (q[i] - c[i]) * (q[j] - c[j]);
                }
            }
        }
        let inv = spd_inverse(&s, k).unwrap_or_else(|| {
            // Weights collapsed onto a lower-dimensional set; fall back to the
            // unit ball of the whitened frame, rescaled by the caller.
            let mut id = [[0.0; 4]; 4];
            for (i, row) in id.iter_mut().enumerate().take(k) {
                row[i] = 1.0;
            }
            id
        });
        let mut a = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                a[i * k + j] = inv[i][j] / k as f64;
            }
        }
        (c, a)
    }
}

fn lift(y: &[f64], k: usize) -> [f64; 4] {
    let mut q = [0.0; 4];
    q[..k].copy_from_slice(&y[..k]);
    q[k] = 1.0;
    q
}

#[inline]
fn quad(a: &Mat4, q: &[f64; 4], m: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..m {
        let mut r = 0.0;
        for j in 0..m {
            r += a[i][j] * q[j];
        }
        s += q[i] * r;
    }
    s
}

fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &x) in v.iter().enumerate() {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

/// Inverse of the leading `m×m` block of a symmetric positive definite matrix
/// via Cholesky.
fn spd_inverse(a: &Mat4, m: usize) -> Option<Mat4> {
    let mut l = [[0.0; 4]; 4];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut linv = [[0.0; 4]; 4];
    for i in 0..m {
        linv[i][i] = 1.0 / l[i][i];
        for j in 0..i {
            let mut s = 0.0;
            for p in j..i {
                s -= l[i][p] * linv[p][j];
            }
            linv[i][j] = s / l[i][i];
        }
    }
    let mut inv = [[0.0; 4]; 4];
    for i in 0..m {
        for j in 0..=i {
            let s: f64 = (i..m).map(|p| linv[p][i] * linv[p][j]).sum();
            inv[i][j] = s;
            inv[j][i] = s;
        }
    }
    if inv.iter().flatten().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}
