//! CSV and JSON writers. Every float leaves here rounded to 12 significant
//! digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::cycles::BasinGrid;
use crate::dynamics::Trajectory;
use crate::error::Result;
use crate::sweep::SweepTable;

pub const SIGNIFICANT_DIGITS: usize = 12;

pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "x", "y"];
pub const BASIN_HEADER: [&str; 3] = ["x0", "y0", "label"];

/// Rounds to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v)
        .parse()
        .unwrap_or(v)
}

/// Shortest text for `v` rounded to 12 significant digits; scientific
/// notation outside `[1e-6, 1e15)`.
pub fn fmt_f64(v: f64) -> String {
    let r = round_sig(v);
    let a = r.abs();
    if r == 0.0 || (1e-6..1e15).contains(&a) || !r.is_finite() {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(f) = n.as_f64() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(f)) {
                        *n = rounded;
                    }
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes `value` with every float rounded; non-finite floats become null.
pub fn to_json_value<T: Serialize>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    Ok(v)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let v = to_json_value(value)?;
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &v).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        w.write_record([fmt_f64(*t), fmt_f64(s.x), fmt_f64(s.y)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_basin_csv(path: &Path, grid: &BasinGrid) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(BASIN_HEADER)?;
    for c in &grid.cells {
        w.write_record([fmt_f64(c.x0), fmt_f64(c.y0), c.label.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Stable points are packed as `label@x;y` joined by `|`.
pub fn write_sweep_csv(path: &Path, table: &SweepTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(table.header())?;
    for row in &table.rows {
        let mut rec: Vec<String> = row.values.iter().map(|&v| fmt_f64(v)).collect();
        let stable = row
            .stable_points
            .iter()
            .map(|p| format!("{}@{};{}", p.label, fmt_f64(p.x), fmt_f64(p.y)))
            .collect::<Vec<_>>()
            .join("|");
        rec.extend([
            row.regime.to_string(),
            fmt_f64(row.e_c),
            fmt_f64(row.e_d),
            row.fixed_points.to_string(),
            row.interior_points.to_string(),
            row.stable_points.len().to_string(),
            stable,
            row.interior_predicate
                .map(|b| b.to_string())
                .unwrap_or_default(),
        ]);
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}
