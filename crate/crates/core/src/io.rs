//! CSV and JSON readers and writers.
//!
//! Floats are written with the shortest representation that round-trips, so
//! files are byte-identical across runs with identical inputs.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{HeatError, Result};
use crate::grid::{BoundaryCurve, NodalField, TraceMeasurement};
use crate::inverse::ReconstructionResult;
use crate::kirchhoff::{ConductionLaw, LawBounds};

const UNIFORM_TOL: f64 = 1e-9;

fn io_err(path: &Path, source: std::io::Error) -> HeatError {
    HeatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn fmt_err(path: &Path, message: impl std::fmt::Display) -> HeatError {
    HeatError::Format {
        path: path.display().to_string(),
        message: message.to_string(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> HeatError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => fmt_err(path, format!("{other:?}")),
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| fmt_err(path, e))?;
    std::io::Write::write_all(&mut w, b"\n").map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| fmt_err(path, e))
}

/// Writes `rows` with a header derived from the row type.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_err(path, e)))
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct LawRow {
    s: f64,
    a: f64,
}

/// Sidecar metadata stored next to a law table as `<stem>.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawMetadata {
    pub bounds: LawBounds,
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    path.with_extension("json")
}

/// Reads a uniformly tabulated law from `s,a` rows.
///
/// Bounds come from `bounds` if given, else from the sidecar JSON if present,
/// else from the samples themselves (min, max and steepest slope).
pub fn read_law_csv(path: &Path, bounds: Option<LawBounds>) -> Result<ConductionLaw> {
    let rows: Vec<LawRow> = read_csv(path)?;
    if rows.len() < 2 {
        return Err(fmt_err(path, "a law table needs at least two rows"));
    }
    let s_lo = rows[0].s;
    let s_hi = rows[rows.len() - 1].s;
    let ds = (s_hi - s_lo) / (rows.len() - 1) as f64;
    for (k, r) in rows.iter().enumerate() {
        let expected = s_lo + k as f64 * ds;
        if (r.s - expected).abs() > UNIFORM_TOL * (1.0 + expected.abs()) {
            return Err(fmt_err(
                path,
                format!("row {k}: s = {} breaks uniform spacing {ds}", r.s),
            ));
        }
    }
    let values: Vec<f64> = rows.iter().map(|r| r.a).collect();
    let bounds = match bounds {
        Some(b) => b,
        None if sidecar(path).exists() => read_json::<LawMetadata>(&sidecar(path))?.bounds,
        None => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lip = values
                .windows(2)
                .map(|w| (w[1] - w[0]).abs() / ds)
                .fold(0.0, f64::max);
            LawBounds {
                a_lower: lo,
                a_upper: hi,
                lipschitz: lip,
            }
        }
    };
    ConductionLaw::new(s_lo, s_hi, values, bounds)
}

/// Writes the law table and its sidecar metadata.
pub fn write_law_csv(path: &Path, law: &ConductionLaw) -> Result<()> {
    let rows: Vec<LawRow> = law
        .values()
        .iter()
        .enumerate()
        .map(|(i, &a)| LawRow {
            s: law.sample_point(i),
            a,
        })
        .collect();
    write_csv(path, &rows)?;
    write_json(
        &sidecar(path),
        &LawMetadata {
            bounds: law.bounds(),
        },
    )
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    s: f64,
    g: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TimedTraceRow {
    t: f64,
    s: f64,
    g: f64,
}

/// Edge coordinates of the curve samples.
fn positions(curve: &BoundaryCurve) -> Vec<f64> {
    curve
        .params()
        .iter()
        .map(|p| curve.start() + p * curve.arclength())
        .collect()
}

fn check_positions(path: &Path, curve: &BoundaryCurve, s: &[f64]) -> Result<()> {
    let expected = positions(curve);
    if s.len() != expected.len() {
        return Err(fmt_err(
            path,
            format!("{} samples but the curve has {}", s.len(), expected.len()),
        ));
    }
    for (k, (a, b)) in s.iter().zip(&expected).enumerate() {
        if (a - b).abs() > UNIFORM_TOL {
            return Err(fmt_err(
                path,
                format!("row {k}: s = {a} but the curve expects {b}"),
            ));
        }
    }
    Ok(())
}

/// `s,g` rows, `s` being the coordinate along the curve's edge.
pub fn write_trace_csv(path: &Path, trace: &TraceMeasurement) -> Result<()> {
    let rows: Vec<TraceRow> = positions(trace.curve())
        .into_iter()
        .zip(trace.values())
        .map(|(s, &g)| TraceRow { s, g })
        .collect();
    write_csv(path, &rows)
}

pub fn read_trace_csv(path: &Path, curve: &BoundaryCurve) -> Result<TraceMeasurement> {
    let rows: Vec<TraceRow> = read_csv(path)?;
    let s: Vec<f64> = rows.iter().map(|r| r.s).collect();
    check_positions(path, curve, &s)?;
    TraceMeasurement::new(curve.clone(), rows.iter().map(|r| r.g).collect(), None)
}

/// `t,s,g` rows grouped by time.
pub fn write_trace_series_csv(path: &Path, traces: &[TraceMeasurement]) -> Result<()> {
    let mut rows = Vec::new();
    for tr in traces {
        let t = tr
            .time()
            .ok_or_else(|| HeatError::invalid("trace series entries need a time"))?;
        for (s, &g) in positions(tr.curve()).into_iter().zip(tr.values()) {
            rows.push(TimedTraceRow { t, s, g });
        }
    }
    write_csv(path, &rows)
}

/// Reads `t,s,g` rows; rows for one time must be contiguous.
pub fn read_trace_series_csv(path: &Path, curve: &BoundaryCurve) -> Result<Vec<TraceMeasurement>> {
    let rows: Vec<TimedTraceRow> = read_csv(path)?;
    let mut out: Vec<TraceMeasurement> = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let t = rows[start].t;
        let end = start + rows[start..].iter().take_while(|r| r.t == t).count();
        if out.iter().any(|tr| tr.time() == Some(t)) {
            return Err(fmt_err(
                path,
                format!("rows for t = {t} are not contiguous"),
            ));
        }
        let s: Vec<f64> = rows[start..end].iter().map(|r| r.s).collect();
        check_positions(path, curve, &s)?;
        let g = rows[start..end].iter().map(|r| r.g).collect();
        out.push(TraceMeasurement::new(curve.clone(), g, Some(t))?);
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct FieldRow {
    x: f64,
    y: f64,
    u: f64,
}

pub fn write_field_csv(path: &Path, field: &NodalField) -> Result<()> {
    let grid = field.grid();
    let n = grid.n();
    let mut rows = Vec::with_capacity(grid.len());
    for j in 0..n {
        for i in 0..n {
            rows.push(FieldRow {
                x: grid.coord(i),
                y: grid.coord(j),
                u: field.values()[grid.index(i, j)],
            });
        }
    }
    write_csv(path, &rows)
}

#[derive(Debug, Serialize)]
struct ResultRow {
    v: f64,
    a_hat: f64,
}

/// `v,a_hat` table plus the diagnostics as JSON next to it.
pub fn write_result(path: &Path, result: &ReconstructionResult) -> Result<()> {
    let rows: Vec<ResultRow> = result
        .v()
        .iter()
        .zip(result.a_hat())
        .map(|(&v, &a_hat)| ResultRow { v, a_hat })
        .collect();
    write_csv(path, &rows)?;
    write_json(
        &path.with_extension("diagnostics.json"),
        result.diagnostics(),
    )
}
