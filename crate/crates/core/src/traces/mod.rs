//! Head-position traces: CSV I/O, validation, synthetic generation, and
//! movement statistics.

mod stats;
mod synth;
mod trace;

pub use stats::{movement_stats, MovementStats};
pub use synth::{generate_synthetic_trace, ProfileKind, SynthProfile};
pub use trace::{
    parse_trace_csv, parse_trace_csv_detailed, write_trace_csv, ParseWarnings, PoseSample, Trace,
    GAP_JITTER, MAX_COORD,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("header must start with `t,x,y,z`")]
    MalformedHeader,
    #[error("malformed row at line {0}")]
    MalformedRow(usize),
    #[error("timestamp not increasing at line {0}")]
    NonMonotoneTime(usize),
    #[error("trace needs at least 2 samples")]
    TooShort,
    #[error("sample {0} is non-finite or out of range")]
    InvalidSample(usize),
    #[error("invalid sample rate {0}")]
    InvalidRate(f64),
    #[error("{irregular} of {gaps} sample gaps deviate more than 20% from the nominal period")]
    IrregularRate { irregular: usize, gaps: usize },
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("read failed: {0}")]
    Io(String),
}
