//! Text model format:
//!
//! ```text
//! BEMODEL 1
//! binsize <bx> <by> <bz>
//! horizon <H>
//! rate <hz>
//! global <support> <cx> <cy> <cz> <a11> <a12> <a13> <a22> <a23> <a33>
//! bins <N>
//! <ix> <iy> <iz> <support> <cx> <cy> <cz> <a11> <a12> <a13> <a22> <a23> <a33>   (N rows)
//! ```
//!
//! Rows are sorted by `(ix, iy, iz)`; floats are written as the shortest
//! decimal that reads back to the same value.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::geometry::{Ellipsoid, Vec3};

use super::binning::{BinId, BinSizes};
use super::train::{BinEntry, ModelConfig, TrainedModel};
use super::ModelError;

pub const FORMAT_VERSION: u64 = 1;
const MAGIC: &str = "BEMODEL";

fn push_entry(out: &mut String, e: &BinEntry) {
    let c = e.ellipsoid.center();
    let _ = write!(out, "{} {} {} {}", e.support, c.x, c.y, c.z);
    for a in e.ellipsoid.shape_upper() {
        let _ = write!(out, " {a}");
    }
    out.push('\n');
}

/// Serializes `model`. Output is a pure function of the model contents.
pub fn save_model<W: Write>(model: &TrainedModel, mut sink: W) -> std::io::Result<()> {
    let cfg = &model.config;
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
    let b = cfg.bin_sizes;
    let _ = writeln!(out, "binsize {} {} {}", b.bx, b.by, b.bz);
    let _ = writeln!(out, "horizon {}", cfg.horizon);
    let _ = writeln!(out, "rate {}", cfg.rate_hz);
    out.push_str("global ");
    push_entry(&mut out, &model.global);
    let _ = writeln!(out, "bins {}", model.bins.len());
    for (id, e) in model.sorted_bins() {
        let _ = write!(out, "{} {} {} ", id.ix, id.iy, id.iz);
        push_entry(&mut out, &e);
    }
    sink.write_all(out.as_bytes())
}

/// Reads a model written by [`save_model`]. The returned model carries default
/// fitting parameters and no training metadata.
pub fn load_model<R: Read>(mut source: R) -> Result<TrainedModel, ModelError> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| ModelError::Io(e.to_string()))?;
    let text = String::from_utf8(bytes).map_err(|_| ModelError::CorruptModel(1))?;
    let body = text.strip_suffix('\n').unwrap_or(&text);
    let all: Vec<&str> = body.split('\n').collect();
    let mut cursor = 0usize;
    let mut next = |expect: &str| -> Result<(usize, Vec<&str>), ModelError> {
        cursor += 1;
        let line = all
            .get(cursor - 1)
            .ok_or(ModelError::CorruptModel(cursor))?;
        let fields: Vec<&str> = line.split(' ').collect();
        if !expect.is_empty() && fields[0] != expect {
            return Err(ModelError::CorruptModel(cursor));
        }
        Ok((cursor, fields))
    };

    let (_, head) = next("")?;
    if head.len() != 2 || head[0] != MAGIC {
        return Err(ModelError::CorruptModel(1));
    }
    let version: u64 = head[1].parse().map_err(|_| ModelError::CorruptModel(1))?;
    if version != FORMAT_VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }

    let (no, f) = next("binsize")?;
    let v = floats(&f[1..], 3, no)?;
    let bin_sizes = BinSizes::new(v[0], v[1], v[2]).map_err(|_| ModelError::CorruptModel(no))?;

    let (no, f) = next("horizon")?;
    let horizon = single_int(&f, no)?;
    if horizon == 0 {
        return Err(ModelError::CorruptModel(no));
    }

    let (no, f) = next("rate")?;
    let rate = floats(&f[1..], 1, no)?[0];
    if rate.is_nan() || rate <= 0.0 {
        return Err(ModelError::CorruptModel(no));
    }

    let (no, f) = next("global")?;
    let global = entry(&f[1..], no)?;

    let (no, f) = next("bins")?;
    let count = single_int(&f, no)?;

    let mut bins = HashMap::with_capacity(count);
    let mut last: Option<BinId> = None;
    for _ in 0..count {
        let (no, f) = next("")?;
        if f.len() != 13 {
            return Err(ModelError::CorruptModel(no));
        }
        let idx: Vec<i32> = f[..3]
            .iter()
            .map(|s| s.parse().map_err(|_| ModelError::CorruptModel(no)))
            .collect::<Result<_, _>>()?;
        let id = BinId::new(idx[0], idx[1], idx[2]).map_err(|_| ModelError::CorruptModel(no))?;
        if last.is_some_and(|l| l >= id) {
            return Err(ModelError::CorruptModel(no));
        }
        last = Some(id);
        bins.insert(id, entry(&f[3..], no)?);
    }
    if all.len() > count + 6 {
        return Err(ModelError::CorruptModel(count + 7));
    }

    let config = ModelConfig {
        bin_sizes,
        horizon,
        rate_hz: rate,
        ..ModelConfig::default()
    };
    Ok(TrainedModel {
        config,
        bins,
        global,
        meta: None,
    })
}

fn floats(fields: &[&str], n: usize, line: usize) -> Result<Vec<f64>, ModelError> {
    if fields.len() != n {
        return Err(ModelError::CorruptModel(line));
    }
    fields
        .iter()
        .map(|s| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(ModelError::CorruptModel(line)),
        })
        .collect()
}

fn single_int(fields: &[&str], line: usize) -> Result<usize, ModelError> {
    if fields.len() != 2 {
        return Err(ModelError::CorruptModel(line));
    }
    fields[1]
        .parse()
        .map_err(|_| ModelError::CorruptModel(line))
}

fn entry(fields: &[&str], line: usize) -> Result<BinEntry, ModelError> {
    if fields.len() != 10 {
        return Err(ModelError::CorruptModel(line));
    }
    let support: usize = fields[0]
        .parse()
        .map_err(|_| ModelError::CorruptModel(line))?;
    if support == 0 {
        return Err(ModelError::CorruptModel(line));
    }
    let v = floats(&fields[1..], 9, line)?;
    let shape = [v[3], v[4], v[5], v[6], v[7], v[8]];
    let ellipsoid = Ellipsoid::from_upper(Vec3::new(v[0], v[1], v[2]), shape)
        .map_err(|_| ModelError::CorruptModel(line))?;
    Ok(BinEntry { ellipsoid, support })
}
