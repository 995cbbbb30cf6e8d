use std::collections::HashMap;

use rayon::prelude::*;

use crate::geometry::{fit_source, Ellipsoid, PointSource, Vec3, DEFAULT_MAX_ITERATIONS};
use crate::traces::Trace;

use super::binning::{bin_id, BinId, BinSizes};
use super::ModelError;

/// Relative tolerance between a trace's rate and the configured rate.
pub const RATE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub bin_sizes: BinSizes,
    /// Future samples covered by each prediction.
    pub horizon: usize,
    pub rate_hz: f64,
    pub fit_tolerance: f64,
    /// Bins with fewer offsets are still fitted but counted as sparse.
    pub min_support: usize,
}

impl Default for ModelConfig {
    /// 2 mm isotropic bins, 10 samples at 90 Hz (111 ms).
    fn default() -> Self {
        Self {
            bin_sizes: BinSizes {
                bx: 0.002,
                by: 0.002,
                bz: 0.002,
            },
            horizon: 10,
            rate_hz: 90.0,
            fit_tolerance: crate::geometry::DEFAULT_TOLERANCE,
            min_support: 1,
        }
    }
}

impl ModelConfig {
    pub fn with_bin_sizes(self, bin_sizes: BinSizes) -> Self {
        Self { bin_sizes, ..self }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        BinSizes::new(self.bin_sizes.bx, self.bin_sizes.by, self.bin_sizes.bz)?;
        if self.horizon == 0 {
            return Err(ModelError::InvalidConfig(
                "horizon must be at least 1".into(),
            ));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "invalid rate {}",
                self.rate_hz
            )));
        }
        if !(self.fit_tolerance.is_finite() && self.fit_tolerance > 0.0) {
            return Err(ModelError::InvalidConfig(format!(
                "invalid fit tolerance {}",
                self.fit_tolerance
            )));
        }
        if self.min_support == 0 {
            return Err(ModelError::InvalidConfig(
                "min_support must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn check_rate(&self, trace: &Trace) -> Result<(), ModelError> {
        if (trace.rate_hz() - self.rate_hz).abs() > RATE_TOLERANCE * self.rate_hz {
            return Err(ModelError::RateMismatch {
                expected: self.rate_hz,
                found: trace.rate_hz(),
            });
        }
        Ok(())
    }
}

/// One bin's prediction volume. The ellipsoid is in offset space: relative to
/// the position at query time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinEntry {
    pub ellipsoid: Ellipsoid,
    /// Number of training offsets enclosed.
    pub support: usize,
}

/// Training-set description; absent on models read back from disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrainingMeta {
    pub trace_count: usize,
    pub sample_count: usize,
    /// Bins holding fewer than `min_support` offsets.
    pub sparse_bins: usize,
    /// Bin fits that hit the iteration cap.
    pub unconverged_fits: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub bins: HashMap<BinId, BinEntry>,
    /// Fitted over every training offset; answers queries for unseen bins.
    pub global: BinEntry,
    pub meta: Option<TrainingMeta>,
}

/// Result of a query, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub ellipsoid: Ellipsoid,
    pub used_fallback: bool,
}

impl TrainedModel {
    /// Bins in lexicographic order.
    pub fn sorted_bins(&self) -> Vec<(BinId, BinEntry)> {
        let mut v: Vec<_> = self.bins.iter().map(|(k, e)| (*k, *e)).collect();
        v.sort_by_key(|(k, _)| *k);
        v
    }

    /// Predicted volume for the next `horizon` samples given the last two
    /// positions. Lookup is a single hash probe.
    pub fn predict(&self, prev_pos: &Vec3, cur_pos: &Vec3) -> Result<Prediction, ModelError> {
        if !prev_pos.iter().chain(cur_pos.iter()).all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteInput);
        }
        let entry = match bin_id(&(cur_pos - prev_pos), &self.config.bin_sizes) {
            Ok(id) => self.bins.get(&id),
            // A movement too large to index cannot have a bin.
            Err(ModelError::BinOverflow) => None,
            Err(e) => return Err(e),
        };
        Ok(match entry {
            Some(e) => Prediction {
                ellipsoid: e.ellipsoid.translated(cur_pos),
                used_fallback: false,
            },
            None => Prediction {
                ellipsoid: self.global.ellipsoid.translated(cur_pos),
                used_fallback: true,
            },
        })
    }
}

/// Free-function form of [`TrainedModel::predict`].
pub fn predict(
    model: &TrainedModel,
    prev_pos: &Vec3,
    cur_pos: &Vec3,
) -> Result<Prediction, ModelError> {
    model.predict(prev_pos, cur_pos)
}

/// Number of future samples paired with source index `k`.
#[inline]
pub(crate) fn future_count(len: usize, k: usize, horizon: usize) -> usize {
    horizon.min(len - 1 - k)
}

/// Every `(bin, offset)` pair of one trace: for each source index
/// `k = 1..len−2`, the bin of `pos[k] − pos[k−1]` paired with
/// `pos[k+j] − pos[k]` for `j = 1..min(horizon, len−1−k)`, in `(k, j)` order.
pub fn extract_training_pairs(
    trace: &Trace,
    config: &ModelConfig,
) -> Result<Vec<(BinId, Vec3)>, ModelError> {
    let len = trace.len();
    if len < 2 {
        return Err(ModelError::TooShort);
    }
    let mut out = Vec::new();
    for k in 1..len.saturating_sub(1) {
        let cur = trace.pos(k);
        let id = bin_id(&(cur - trace.pos(k - 1)), &config.bin_sizes)?;
        for j in 1..=future_count(len, k, config.horizon) {
            out.push((id, trace.pos(k + j) - cur));
        }
    }
    Ok(out)
}

/// One query point of the training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Source {
    bin: BinId,
    trace: u32,
    k: u32,
}

/// Offsets of a run of sources, generated on demand.
struct Offsets<'a> {
    traces: &'a [&'a Trace],
    sources: &'a [Source],
    horizon: usize,
}

impl Offsets<'_> {
    fn count(&self) -> usize {
        self.sources
            .iter()
            .map(|s| {
                future_count(
                    self.traces[s.trace as usize].len(),
                    s.k as usize,
                    self.horizon,
                )
            })
            .sum()
    }
}

impl PointSource for Offsets<'_> {
    fn for_each_point(&self, f: &mut dyn FnMut(Vec3)) {
        for s in self.sources {
            let t = self.traces[s.trace as usize];
            let k = s.k as usize;
            let cur = t.pos(k);
            for j in 1..=future_count(t.len(), k, self.horizon) {
                f(t.pos(k + j) - cur);
            }
        }
    }
}

/// Builds the bin → ellipsoid map from `traces`.
///
/// Sources are sorted by bin, so the result does not depend on thread count.
pub fn train(traces: &[Trace], config: &ModelConfig) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    for t in traces {
        config.check_rate(t)?;
    }
    let usable: Vec<&Trace> = traces.iter().filter(|t| t.len() >= 3).collect();
    if usable.is_empty() {
        return Err(ModelError::NoTrainingData);
    }

    let per_trace: Vec<Vec<Source>> = usable
        .par_iter()
        .enumerate()
        .map(|(ti, t)| {
            (1..t.len() - 1)
                .map(|k| {
                    let id = bin_id(&(t.pos(k) - t.pos(k - 1)), &config.bin_sizes)?;
                    Ok(Source {
                        bin: id,
                        trace: ti as u32,
                        k: k as u32,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()
        })
        .collect::<Result<_, _>>()?;
    let mut sources: Vec<Source> = per_trace.into_iter().flatten().collect();
    sources.par_sort_unstable();

    let mut groups: Vec<&[Source]> = Vec::new();
    let mut start = 0;
    for i in 1..=sources.len() {
        if i == sources.len() || sources[i].bin != sources[start].bin {
            groups.push(&sources[start..i]);
            start = i;
        }
    }

    let fit = |group: &[Source]| -> Result<(BinEntry, bool), ModelError> {
        let offsets = Offsets {
            traces: &usable,
            sources: group,
            horizon: config.horizon,
        };
        let (ellipsoid, report) =
            fit_source(&offsets, config.fit_tolerance, DEFAULT_MAX_ITERATIONS)?;
        Ok((
            BinEntry {
                ellipsoid,
                support: offsets.count(),
            },
            report.converged,
        ))
    };

    let fitted: Vec<(BinId, BinEntry, bool)> = groups
        .par_iter()
        .map(|g| fit(g).map(|(e, ok)| (g[0].bin, e, ok)))
        .collect::<Result<_, _>>()?;
    let (global, global_ok) = fit(&sources)?;

    let meta = TrainingMeta {
        trace_count: traces.len(),
        sample_count: traces.iter().map(|t| t.len()).sum(),
        sparse_bins: fitted
            .iter()
            .filter(|(_, e, _)| e.support < config.min_support)
            .count(),
        unconverged_fits: fitted.iter().filter(|(_, _, ok)| !ok).count() + usize::from(!global_ok),
    };
    let bins = fitted.into_iter().map(|(id, e, _)| (id, e)).collect();
    Ok(TrainedModel {
        config: *config,
        bins,
        global,
        meta: Some(meta),
    })
}
