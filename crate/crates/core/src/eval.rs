//! Accuracy and volume of predictions on held-out traces, bin-size sweeps,
//! and a constant-velocity baseline.
//!
//! Accuracy counts next positions, not queries: each query contributes
//! `min(horizon, len−1−k)` checks. Volumes are per query.

use std::io::Write;

use rayon::prelude::*;

use crate::geometry::{Ellipsoid, Vec3, DEFAULT_SLACK};
use crate::model::{train, BinSizes, ModelConfig, ModelError, TrainedModel};
use crate::traces::Trace;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no test traces")]
    NoTestData,
    #[error("no training traces")]
    NoTrainingData,
    #[error("test trace {0} has fewer than 3 samples")]
    TooShort(usize),
    #[error("test trace {index} rate {found} Hz does not match model rate {expected} Hz")]
    RateMismatch {
        index: usize,
        expected: f64,
        found: f64,
    },
    #[error("bin sizes must be non-empty and strictly ascending")]
    InvalidBinSizes,
    #[error("invalid radius {0}")]
    InvalidRadius(f64),
    #[error("at bin size {bin_size}: {source}")]
    AtBinSize {
        bin_size: BinSizes,
        source: Box<EvalError>,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    /// Fraction of checked next positions inside their prediction.
    pub accuracy: f64,
    pub mean_volume_cm3: f64,
    pub median_volume_cm3: f64,
    /// Fraction of queries answered by the global ellipsoid.
    pub fallback_rate: f64,
    pub queries: usize,
    pub checked_positions: usize,
}

/// Raw counts behind an [`EvalReport`].
#[derive(Debug, Default, Clone)]
struct Tally {
    contained: usize,
    checked: usize,
    fallbacks: usize,
    volumes: Vec<f64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.contained += other.contained;
        self.checked += other.checked;
        self.fallbacks += other.fallbacks;
        self.volumes.extend(other.volumes);
        self
    }

    fn report(mut self) -> EvalReport {
        let queries = self.volumes.len();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let mean = if queries == 0 {
            0.0
        } else {
            self.volumes.iter().sum::<f64>() / queries as f64
        };
        EvalReport {
            accuracy: ratio(self.contained, self.checked),
            mean_volume_cm3: mean,
            median_volume_cm3: median(&mut self.volumes),
            fallback_rate: ratio(self.fallbacks, queries),
            queries,
            checked_positions: self.checked,
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn check_traces(test: &[Trace], rate_hz: f64) -> Result<(), EvalError> {
    if test.is_empty() {
        return Err(EvalError::NoTestData);
    }
    for (index, t) in test.iter().enumerate() {
        if t.len() < 3 {
            return Err(EvalError::TooShort(index));
        }
        if (t.rate_hz() - rate_hz).abs() > crate::model::RATE_TOLERANCE * rate_hz {
            return Err(EvalError::RateMismatch {
                index,
                expected: rate_hz,
                found: t.rate_hz(),
            });
        }
    }
    Ok(())
}

/// Scores any predictor `(prev, cur) -> (ellipsoid, used_fallback)` over
/// `test`, with `horizon` future samples per query.
fn tally_with<F>(test: &[Trace], horizon: usize, predictor: F) -> Result<Tally, EvalError>
where
    F: Fn(&Vec3, &Vec3) -> Result<(Ellipsoid, bool), EvalError> + Sync,
{
    let per_trace: Vec<Tally> = test
        .par_iter()
        .map(|t| {
            let mut tally = Tally {
                volumes: Vec::with_capacity(t.len()),
                ..Tally::default()
            };
            let len = t.len();
            for k in 1..len - 1 {
                let cur = t.pos(k);
                let (e, fallback) = predictor(&t.pos(k - 1), &cur)?;
                tally.fallbacks += usize::from(fallback);
                tally.volumes.push(e.volume_cm3());
                for j in 1..=horizon.min(len - 1 - k) {
                    tally.checked += 1;
                    if e.quadratic_form(&t.pos(k + j)) <= 1.0 + DEFAULT_SLACK {
                        tally.contained += 1;
                    }
                }
            }
            Ok(tally)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(per_trace.into_iter().fold(Tally::default(), Tally::merge))
}

/// Scores `model` on `test`: every query index `k = 1..len−2` predicts from
/// `(pos[k−1], pos[k])` and checks the next `horizon` positions.
pub fn evaluate(model: &TrainedModel, test: &[Trace]) -> Result<EvalReport, EvalError> {
    check_traces(test, model.config.rate_hz)?;
    let tally = tally_with(test, model.config.horizon, |prev, cur| {
        let p = model.predict(prev, cur)?;
        Ok((p.ellipsoid, p.used_fallback))
    })?;
    Ok(tally.report())
}

/// Ball of fixed `radius` around the position extrapolated `horizon` samples
/// ahead at the last velocity.
pub fn baseline_constant_velocity(
    test: &[Trace],
    radius: f64,
    horizon: usize,
) -> Result<EvalReport, EvalError> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(EvalError::InvalidRadius(radius));
    }
    if test.is_empty() {
        return Err(EvalError::NoTestData);
    }
    if let Some(i) = test.iter().position(|t| t.len() < 3) {
        return Err(EvalError::TooShort(i));
    }
    let tally = tally_with(test, horizon, |prev, cur| {
        let center = cur + (cur - prev) * horizon as f64;
        let ball = Ellipsoid::ball(center, radius).map_err(ModelError::from)?;
        Ok((ball, false))
    })?;
    Ok(tally.report())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub bin_size: BinSizes,
    pub report: EvalReport,
}

/// Trains on `train_traces` and evaluates on `test_traces` once per entry of
/// `bin_sizes`, keeping every other setting from `template`.
pub fn sweep_bin_sizes(
    train_traces: &[Trace],
    test_traces: &[Trace],
    bin_sizes: &[BinSizes],
    template: &ModelConfig,
) -> Result<Vec<SweepRow>, EvalError> {
    if train_traces.is_empty() {
        return Err(EvalError::NoTrainingData);
    }
    if test_traces.is_empty() {
        return Err(EvalError::NoTestData);
    }
    let ascending = bin_sizes.windows(2).all(|w| {
        let (a, b) = (w[0].as_vec(), w[1].as_vec());
        a.iter().zip(b.iter()).all(|(x, y)| x < y)
    });
    if bin_sizes.is_empty() || !ascending {
        return Err(EvalError::InvalidBinSizes);
    }
    bin_sizes
        .iter()
        .map(|&bin_size| {
            let tag = |e: EvalError| EvalError::AtBinSize {
                bin_size,
                source: Box::new(e),
            };
            let config = template.with_bin_sizes(bin_size);
            let model = train(train_traces, &config).map_err(|e| tag(e.into()))?;
            let report = evaluate(&model, test_traces).map_err(tag)?;
            Ok(SweepRow { bin_size, report })
        })
        .collect()
}

pub const SWEEP_CSV_HEADER: &str =
    "bin_size_m,accuracy,mean_volume_cm3,median_volume_cm3,fallback_rate,queries,checked_positions";

/// Writes rows under [`SWEEP_CSV_HEADER`]. Anisotropic sizes are written as
/// `BX BY BZ` in the first field.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut sink: W) -> std::io::Result<()> {
    let mut out = String::new();
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.bin_size,
            r.accuracy,
            r.mean_volume_cm3,
            r.median_volume_cm3,
            r.fallback_rate,
            r.queries,
            r.checked_positions
        ));
    }
    sink.write_all(out.as_bytes())
}
