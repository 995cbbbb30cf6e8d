//! Converts predicted ellipsoids into sets of grid tiles to pre-load, and
//! scores those sets against where the head actually went.

use std::io::Write;

use rayon::prelude::*;

use crate::eval::EvalError;
use crate::geometry::{Ellipsoid, GeometryError, Vec3, DEFAULT_SLACK};
use crate::model::TrainedModel;
use crate::traces::Trace;

pub const MIN_TILE_SIZE: f64 = 0.01;
pub const MAX_TILE_SIZE: f64 = 10.0;
pub const MAX_TILES: u64 = 1_000_000;
/// Looser than the evaluation slack so every position counted as contained
/// also lands in a kept tile, rounding included.
pub const TILE_SLACK: f64 = 2.0 * DEFAULT_SLACK;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrefetchError {
    #[error("tile size {0} outside [{MIN_TILE_SIZE}, {MAX_TILE_SIZE}] m")]
    InvalidTileSize(f64),
    #[error("grid origin is not finite")]
    InvalidOrigin,
    #[error("ellipsoid spans {0} candidate tiles")]
    ExcessiveTileCount(u64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TileId {
    pub ix: i64,
    pub iy: i64,
    pub iz: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileGrid {
    tile_size: f64,
    origin: Vec3,
}

impl TileGrid {
    pub fn new(tile_size: f64, origin: Vec3) -> Result<Self, PrefetchError> {
        if !(MIN_TILE_SIZE..=MAX_TILE_SIZE).contains(&tile_size) {
            return Err(PrefetchError::InvalidTileSize(tile_size));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(PrefetchError::InvalidOrigin);
        }
        Ok(Self { tile_size, origin })
    }

    pub fn tile_size(&self) -> f64 {
        self.tile_size
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    /// Floor convention: a point on a shared face belongs to the upper tile.
    pub fn tile_of(&self, p: &Vec3) -> TileId {
        let q = (p - self.origin) / self.tile_size;
        TileId {
            ix: q.x.floor() as i64,
            iy: q.y.floor() as i64,
            iz: q.z.floor() as i64,
        }
    }

    fn bounds(&self, t: TileId) -> (Vec3, Vec3) {
        let lo = self.origin + Vec3::new(t.ix as f64, t.iy as f64, t.iz as f64) * self.tile_size;
        (lo, lo.add_scalar(self.tile_size))
    }
}

/// Tiles that may hold a point of `e`, sorted ascending.
///
/// Candidates come from the bounding box. A tile is kept if it holds the
/// center, or if the center clamped into the tile passes the quadratic form.
/// Rotated shapes also keep tiles whose center lies within the ellipsoid
/// grown by the tile half-diagonal.
pub fn tiles_intersecting(e: &Ellipsoid, grid: &TileGrid) -> Result<Vec<TileId>, PrefetchError> {
    let c = e.center();
    let reach = e.axis_aligned_extents()? * (1.0 + TILE_SLACK).sqrt();
    let lo = grid.tile_of(&(c - reach));
    let hi = grid.tile_of(&(c + reach));
    let span = |a: i64, b: i64| (b - a + 1) as u64;
    let count = span(lo.ix, hi.ix)
        .saturating_mul(span(lo.iy, hi.iy))
        .saturating_mul(span(lo.iz, hi.iz));
    if count > MAX_TILES {
        return Err(PrefetchError::ExcessiveTileCount(count));
    }

    let home = grid.tile_of(&c);
    let rotated = !e.is_axis_aligned();
    let half_diag = 0.5 * grid.tile_size * 3f64.sqrt();
    let grown_radius = (1.0 + TILE_SLACK).sqrt() + half_diag * e.max_eigenvalue().sqrt();

    let mut out = Vec::new();
    for ix in lo.ix..=hi.ix {
        for iy in lo.iy..=hi.iy {
            for iz in lo.iz..=hi.iz {
                let t = TileId { ix, iy, iz };
                let (blo, bhi) = grid.bounds(t);
                let keep = t == home
                    || e.quadratic_form(&c.sup(&blo).inf(&bhi)) <= 1.0 + TILE_SLACK
                    || (rotated && e.quadratic_form(&((blo + bhi) / 2.0)).sqrt() <= grown_radius);
                if keep {
                    out.push(t);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrefetchReport {
    pub hit_rate: f64,
    pub mean_tiles_per_query: f64,
    pub queries: usize,
    pub hits: usize,
    pub checked_positions: usize,
    pub total_tiles: usize,
}

impl PrefetchReport {
    fn from_counts(queries: usize, hits: usize, checked: usize, tiles: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            hit_rate: ratio(hits, checked),
            mean_tiles_per_query: ratio(tiles, queries),
            queries,
            hits,
            checked_positions: checked,
            total_tiles: tiles,
        }
    }

    /// Pools the counts of two reports.
    pub fn merge(&self, other: &PrefetchReport) -> PrefetchReport {
        Self::from_counts(
            self.queries + other.queries,
            self.hits + other.hits,
            self.checked_positions + other.checked_positions,
            self.total_tiles + other.total_tiles,
        )
    }
}

/// Replays `test` through `model`, prefetching the tiles of each prediction
/// and counting how many of the next `horizon` positions fall in them.
pub fn simulate_prefetch(
    model: &TrainedModel,
    test: &Trace,
    grid: &TileGrid,
) -> Result<PrefetchReport, PrefetchError> {
    let rate = model.config.rate_hz;
    if test.len() < 3 {
        return Err(EvalError::TooShort(0).into());
    }
    if (test.rate_hz() - rate).abs() > crate::model::RATE_TOLERANCE * rate {
        return Err(EvalError::RateMismatch {
            index: 0,
            expected: rate,
            found: test.rate_hz(),
        }
        .into());
    }
    let len = test.len();
    let horizon = model.config.horizon;
    let counts = (1..len - 1)
        .into_par_iter()
        .map(|k| {
            let pred = model
                .predict(&test.pos(k - 1), &test.pos(k))
                .map_err(EvalError::from)?;
            let tiles = tiles_intersecting(&pred.ellipsoid, grid)?;
            let future = horizon.min(len - 1 - k);
            let hits = (1..=future)
                .filter(|&j| tiles.binary_search(&grid.tile_of(&test.pos(k + j))).is_ok())
                .count();
            Ok::<_, PrefetchError>((hits, future, tiles.len()))
        })
        .try_reduce(|| (0, 0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1, a.2 + b.2)))?;
    Ok(PrefetchReport::from_counts(
        len - 2,
        counts.0,
        counts.1,
        counts.2,
    ))
}

pub const PREFETCH_CSV_HEADER: &str = "tile_size_m,hit_rate,mean_tiles_per_query,queries";

pub fn write_prefetch_csv<W: Write>(
    rows: &[(f64, PrefetchReport)],
    mut sink: W,
) -> std::io::Result<()> {
    let mut out = format!("{PREFETCH_CSV_HEADER}\n");
    for (size, r) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            size, r.hit_rate, r.mean_tiles_per_query, r.queries
        ));
    }
    sink.write_all(out.as_bytes())
}
