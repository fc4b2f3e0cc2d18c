//! On-disk formats.
//!
//! * Field dump, CSV: header `x1,...,xN,value`, one row per node in row-major
//!   order (axis 0 fastest).
//! * Field dump, raw: `n^N` little-endian `f64` values in the same order, with
//!   a JSON sidecar `{"n": .., "N": .., "L": ..}`.
//! * Sweep report: CSV with one row per step and one column per
//!   [`SweepStep`] field, or JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use obstacle_well_core::domain::DomainError;
use obstacle_well_core::{Field, GridSpec, SweepReport, SweepStep};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Field { path: PathBuf, source: DomainError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> FormatError + '_ {
    move |source| FormatError::Csv { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> FormatError + '_ {
    move |source| FormatError::Json { path: path.to_path_buf(), source }
}

fn malformed(path: &Path, message: impl Into<String>) -> FormatError {
    FormatError::Malformed { path: path.to_path_buf(), message: message.into() }
}

/// Sidecar header of a raw field dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawHeader {
    pub n: usize,
    #[serde(rename = "N")]
    pub dimension: usize,
    #[serde(rename = "L")]
    pub half_extent: f64,
}

impl RawHeader {
    pub fn of(grid: &GridSpec) -> Self {
        Self { n: grid.nodes_per_axis(), dimension: grid.dimension(), half_extent: grid.half_extent() }
    }

    pub fn grid(&self, path: &Path) -> Result<GridSpec, FormatError> {
        GridSpec::new(self.dimension, self.n, self.half_extent)
            .map_err(|source| FormatError::Field { path: path.to_path_buf(), source })
    }
}

/// Path of the sidecar belonging to a raw dump: `u.raw` → `u.raw.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    let mut s = raw.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err(path))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let file = File::open(path).map_err(io_err(path))?;
    serde_json::from_reader(BufReader::new(file)).map_err(json_err(path))
}

pub fn write_field_csv(path: &Path, u: &Field) -> Result<(), FormatError> {
    let grid = u.grid();
    let dim = grid.dimension();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header: Vec<String> = (1..=dim).map(|a| format!("x{a}")).collect();
    header.push("value".into());
    w.write_record(&header).map_err(csv_err(path))?;
    let mut row = Vec::with_capacity(dim + 1);
    for (node, value) in u.values().iter().enumerate() {
        let x = grid.point(node);
        row.clear();
        row.extend(x[..dim].iter().map(|c| c.to_string()));
        row.push(value.to_string());
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a CSV field dump; the grid is recovered from the coordinate columns.
pub fn read_field_csv(path: &Path) -> Result<Field, FormatError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    let dim = headers
        .len()
        .checked_sub(1)
        .filter(|d| (1..=3).contains(d))
        .ok_or_else(|| malformed(path, "expected 2 to 4 columns"))?;
    for (a, h) in headers.iter().take(dim).enumerate() {
        if h != format!("x{}", a + 1) {
            return Err(malformed(path, format!("column {} should be x{}, found {h}", a + 1, a + 1)));
        }
    }
    if &headers[dim] != "value" {
        return Err(malformed(path, "last column should be value"));
    }
    let mut values = Vec::new();
    let mut first = f64::NAN;
    let mut last = f64::NAN;
    for (k, record) in r.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| malformed(path, format!("row {}: {e}", k + 1)));
        let x0 = parse(&record[0])?;
        if k == 0 {
            first = x0;
        }
        last = last.max(x0);
        values.push(parse(&record[dim])?);
    }
    let n = (values.len() as f64).powf(1.0 / dim as f64).round() as usize;
    if n.pow(dim as u32) != values.len() {
        return Err(malformed(path, format!("{} rows is not a full {dim}-dimensional grid", values.len())));
    }
    if !(first < 0.0 && (first + last).abs() <= 1e-9 * last.abs()) {
        return Err(malformed(path, "coordinates are not a symmetric box"));
    }
    let grid = GridSpec::new(dim, n, last).map_err(|source| FormatError::Field { path: path.to_path_buf(), source })?;
    Field::from_values(grid, values).map_err(|source| FormatError::Field { path: path.to_path_buf(), source })
}

/// Writes `u` as raw little-endian `f64` plus its JSON sidecar.
pub fn write_field_raw(path: &Path, u: &Field) -> Result<PathBuf, FormatError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for v in u.values() {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    let side = sidecar_path(path);
    write_json(&side, &RawHeader::of(u.grid()))?;
    Ok(side)
}

pub fn read_field_raw(path: &Path) -> Result<Field, FormatError> {
    let header: RawHeader = read_json(&sidecar_path(path))?;
    let grid = header.grid(path)?;
    let mut bytes = Vec::new();
    File::open(path).map_err(io_err(path))?.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.len() != 8 * grid.node_count() {
        return Err(malformed(path, format!("expected {} bytes, found {}", 8 * grid.node_count(), bytes.len())));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunks of 8"))).collect();
    Field::from_values(grid, values).map_err(|source| FormatError::Field { path: path.to_path_buf(), source })
}

/// Reads a field dump, choosing the format from the extension (`.csv` or raw).
pub fn read_field(path: &Path) -> Result<Field, FormatError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_field_csv(path),
        _ => read_field_raw(path),
    }
}

pub fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for step in &report.steps {
        w.serialize(step).map_err(csv_err(path))?;
    }
    if report.steps.is_empty() {
        w.write_record(SWEEP_COLUMNS).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

const SWEEP_COLUMNS: &[&str] = &[
    "param_value",
    "level",
    "penalty_violation",
    "constraint_gap",
    "outside_mass",
    "lamVu2",
    "sup_outside_tilde",
    "a_threshold",
];

pub fn read_sweep_csv(path: &Path) -> Result<SweepReport, FormatError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.iter().ne(SWEEP_COLUMNS.iter().copied()) {
        return Err(malformed(path, "unexpected sweep columns"));
    }
    let steps = r.deserialize::<SweepStep>().collect::<Result<Vec<_>, _>>().map_err(csv_err(path))?;
    Ok(SweepReport { steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_field(dim: usize, n: usize) -> Field {
        let grid = GridSpec::new(dim, n, 2.0).unwrap();
        Field::from_fn(grid, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1] + 3.0 * x[2] * x[2])).exp() * 0.1234567890123)
            .unwrap()
    }

    #[test]
    fn field_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for dim in [2, 3] {
            let u = sample_field(dim, 9);
            let p = dir.path().join(format!("u{dim}.csv"));
            write_field_csv(&p, &u).unwrap();
            assert_eq!(read_field_csv(&p).unwrap(), u);
            let text = std::fs::read_to_string(&p).unwrap();
            let header = text.lines().next().unwrap();
            assert_eq!(header, if dim == 2 { "x1,x2,value" } else { "x1,x2,x3,value" });
            assert_eq!(text.lines().count(), 1 + 9usize.pow(dim as u32));
        }
    }

    #[test]
    fn field_raw_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let u = sample_field(3, 9);
        let p = dir.path().join("u.raw");
        let side = write_field_raw(&p, &u).unwrap();
        assert_eq!(std::fs::metadata(&p).unwrap().len(), 8 * 729);
        let header: serde_json::Value = read_json(&side).unwrap();
        assert_eq!(header, serde_json::json!({"n": 9, "N": 3, "L": 2.0}));
        assert_eq!(read_field(&p).unwrap(), u);
    }

    #[test]
    fn truncated_raw_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let u = sample_field(2, 9);
        let p = dir.path().join("u.raw");
        write_field_raw(&p, &u).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_field_raw(&p), Err(FormatError::Malformed { .. })));
    }

    #[test]
    fn sweep_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let step = |k: f64| SweepStep {
            param_value: 0.1 / k,
            level: 1.0 / 3.0 + k,
            penalty_violation: 1e-7 * k,
            constraint_gap: -2.5e-4,
            outside_mass: 0.0133,
            lam_vu2: std::f64::consts::PI,
            sup_outside_tilde: 1e-12,
            a_threshold: 0.455,
        };
        let report = SweepReport { steps: vec![step(1.0), step(2.0), step(4.0)] };
        let p = dir.path().join("sweep.csv");
        write_sweep_csv(&p, &report).unwrap();
        assert_eq!(read_sweep_csv(&p).unwrap(), report);
        let header = std::fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, SWEEP_COLUMNS.join(","));
        let j = dir.path().join("sweep.json");
        write_json(&j, &report).unwrap();
        assert_eq!(read_json::<SweepReport>(&j).unwrap(), report);
    }
}
