//! CSV and JSON serialization of paths and diagnostic curves.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ergodic::DiagnosticCurve;
use crate::error::{Error, Result};
use crate::stochastic::{PathKind, SamplePath, TimeGrid};

/// Metadata stored next to a path file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathHeader {
    pub kind: PathKind,
    pub seed: u64,
    pub params: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    t: f64,
    value: f64,
}

pub fn write_path_csv<W: Write>(writer: W, path: &SamplePath) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (t, &value) in path.grid().times().zip(path.values()) {
        w.serialize(PathRow { t, value })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,value` CSV back into a path; the times must form a uniform
/// grid starting at zero.
pub fn read_path_csv<R: Read>(reader: R, kind: PathKind) -> Result<SamplePath> {
    let mut r = csv::Reader::from_reader(reader);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for row in r.deserialize::<PathRow>() {
        let row = row?;
        times.push(row.t);
        values.push(row.value);
    }
    if times.len() < 3 {
        return Err(Error::InvalidGrid(format!(
            "path file has {} rows",
            times.len()
        )));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidGrid(format!(
            "first time is {}, expected 0",
            times[0]
        )));
    }
    let grid = TimeGrid::with_steps(times[times.len() - 1], times.len() - 1)?;
    for (k, &t) in times.iter().enumerate() {
        if (t - grid.time(k)).abs() > 1e-9 * grid.horizon().max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "row {k}: time {t} off the uniform grid"
            )));
        }
    }
    SamplePath::new(grid, values, kind)
}

pub fn write_header_json<W: Write>(writer: W, header: &PathHeader) -> Result<()> {
    serde_json::to_writer_pretty(writer, header)?;
    Ok(())
}

pub fn read_header_json<R: Read>(reader: R) -> Result<PathHeader> {
    Ok(serde_json::from_reader(reader)?)
}

pub fn write_curve_csv<W: Write>(writer: W, curve: &DiagnosticCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["horizon", "value"])?;
    for (h, v) in curve.horizons.iter().zip(&curve.values) {
        w.write_record([h.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
