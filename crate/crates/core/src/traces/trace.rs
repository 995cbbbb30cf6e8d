use std::io::{Read, Write};

use crate::geometry::Vec3;

use super::TraceError;

/// Largest coordinate magnitude accepted in a trace, meters.
pub const MAX_COORD: f64 = 100.0;
/// Allowed deviation of a gap from the nominal sample period.
pub const GAP_JITTER: f64 = 0.2;
/// Fraction of gaps that must be within [`GAP_JITTER`].
pub const REGULAR_GAP_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    /// Seconds.
    pub t: f64,
    /// Meters, y up.
    pub pos: Vec3,
}

/// Fixed-rate sequence of head positions. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    rate_hz: f64,
    samples: Vec<PoseSample>,
    label: String,
}

impl Trace {
    /// Validates and wraps `samples`. Errors carry the offending sample index.
    pub fn new(
        rate_hz: f64,
        samples: Vec<PoseSample>,
        label: impl Into<String>,
    ) -> Result<Self, TraceError> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(TraceError::InvalidRate(rate_hz));
        }
        for (i, s) in samples.iter().enumerate() {
            if !sample_ok(s) {
                return Err(TraceError::InvalidSample(i));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(TraceError::NonMonotoneTime(i + 1));
        }
        if samples.len() < 2 {
            return Err(TraceError::TooShort);
        }
        check_regular(&samples, rate_hz)?;
        Ok(Self {
            rate_hz,
            samples,
            label: label.into(),
        })
    }

    /// Trace with timestamps `k / rate_hz`.
    pub fn from_positions(
        rate_hz: f64,
        positions: &[Vec3],
        label: impl Into<String>,
    ) -> Result<Self, TraceError> {
        let samples = positions
            .iter()
            .enumerate()
            .map(|(k, p)| PoseSample {
                t: k as f64 / rate_hz,
                pos: *p,
            })
            .collect();
        Self::new(rate_hz, samples, label)
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn samples(&self) -> &[PoseSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn pos(&self, k: usize) -> Vec3 {
        self.samples[k].pos
    }

    pub fn positions(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.samples.iter().map(|s| s.pos)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same samples shifted by `offset`.
    pub fn translated(&self, offset: &Vec3) -> Result<Self, TraceError> {
        let samples = self
            .samples
            .iter()
            .map(|s| PoseSample {
                t: s.t,
                pos: s.pos + offset,
            })
            .collect();
        Self::new(self.rate_hz, samples, self.label.clone())
    }
}

fn sample_ok(s: &PoseSample) -> bool {
    s.t.is_finite() && s.pos.iter().all(|v| v.is_finite() && v.abs() <= MAX_COORD)
}

fn check_regular(samples: &[PoseSample], rate_hz: f64) -> Result<(), TraceError> {
    let period = 1.0 / rate_hz;
    let gaps = samples.len() - 1;
    let irregular = samples
        .windows(2)
        .filter(|w| ((w[1].t - w[0].t) - period).abs() > GAP_JITTER * period)
        .count();
    if irregular as f64 > (1.0 - REGULAR_GAP_FRACTION) * gaps as f64 {
        return Err(TraceError::IrregularRate { irregular, gaps });
    }
    Ok(())
}

/// Non-fatal findings while parsing a trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseWarnings {
    /// Header names of columns beyond `t,x,y,z`; their values are skipped.
    pub ignored_columns: Vec<String>,
}

/// Parses a trace CSV: header `t,x,y,z` (extra named columns ignored), then one
/// sample per line.
pub fn parse_trace_csv<R: Read>(source: R, rate_hz: f64) -> Result<Trace, TraceError> {
    parse_trace_csv_detailed(source, rate_hz).map(|(t, _)| t)
}

pub fn parse_trace_csv_detailed<R: Read>(
    mut source: R,
    rate_hz: f64,
) -> Result<(Trace, ParseWarnings), TraceError> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| TraceError::Io(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|_| TraceError::InvalidUtf8)?;

    let body = text.strip_suffix('\n').unwrap_or(&text);
    let mut lines = body.split('\n');
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    if header.len() < 4
        || header[..4] != ["t", "x", "y", "z"]
        || header[4..].iter().any(|h| h.is_empty())
    {
        return Err(TraceError::MalformedHeader);
    }
    let warnings = ParseWarnings {
        ignored_columns: header[4..].iter().map(|s| s.to_string()).collect(),
    };

    let mut samples = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != header.len() {
            return Err(TraceError::MalformedRow(line_no));
        }
        let mut vals = [0.0f64; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse().map_err(|_| TraceError::MalformedRow(line_no))?;
        }
        let s = PoseSample {
            t: vals[0],
            pos: Vec3::new(vals[1], vals[2], vals[3]),
        };
        if !sample_ok(&s) {
            return Err(TraceError::MalformedRow(line_no));
        }
        if let Some(prev) = samples.last().map(|p: &PoseSample| p.t) {
            if s.t <= prev {
                return Err(TraceError::NonMonotoneTime(line_no));
            }
        }
        samples.push(s);
    }
    let trace = Trace::new(rate_hz, samples, "")?;
    Ok((trace, warnings))
}

/// Writes `trace` in the format read by [`parse_trace_csv`]. Numbers use the
/// shortest decimal that parses back to the same `f64`.
pub fn write_trace_csv<W: Write>(trace: &Trace, mut sink: W) -> std::io::Result<()> {
    let mut out = String::with_capacity(trace.len() * 48 + 8);
    out.push_str("t,x,y,z\n");
    for s in trace.samples() {
        use std::fmt::Write as _;
        let _ = writeln!(out, "{},{},{},{}", s.t, s.pos.x, s.pos.y, s.pos.z);
    }
    sink.write_all(out.as_bytes())
}
