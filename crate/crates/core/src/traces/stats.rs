use crate::geometry::Vec3;

use super::Trace;

/// Per-frame movement summary of a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementStats {
    /// Per-axis RMS of the per-frame displacement, millimeters.
    pub rms_mm: Vec3,
    /// RMS of the per-frame displacement length, millimeters.
    pub rms_total_mm: f64,
    /// Largest per-frame displacement length, millimeters.
    pub max_displacement_mm: f64,
    /// Volume of the axis-aligned box around all positions, m³.
    pub bbox_volume_m3: f64,
}

/// Summarizes the per-frame displacements `pos[k] − pos[k−1]` of `trace`.
pub fn movement_stats(trace: &Trace) -> MovementStats {
    let mut sq = Vec3::zeros();
    let mut max_len = 0.0f64;
    let mut lo = trace.pos(0);
    let mut hi = lo;
    let mut prev = lo;
    for p in trace.positions().skip(1) {
        let d = p - prev;
        sq += d.component_mul(&d);
        max_len = max_len.max(d.norm());
        lo = lo.inf(&p);
        hi = hi.sup(&p);
        prev = p;
    }
    let frames = (trace.len() - 1) as f64;
    let mean_sq = sq / frames;
    let extent = hi - lo;
    MovementStats {
        rms_mm: mean_sq.map(f64::sqrt) * 1e3,
        rms_total_mm: mean_sq.sum().sqrt() * 1e3,
        max_displacement_mm: max_len * 1e3,
        bbox_volume_m3: extent.x * extent.y * extent.z,
    }
}
