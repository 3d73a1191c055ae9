//! Dataset ingestion and artifact writing.
//!
//! CSV files are headerless and numeric, one point per row. JSON files hold
//! an array of arrays. Writes go to a temporary file that is renamed into
//! place.

use std::collections::HashSet;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ot::Dataset;
use crate::points::Points;
use crate::quantiles::QuantileContour;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for `.json` files, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub dim: usize,
    /// Rows equal to an earlier row.
    pub duplicates: usize,
}

pub fn ingest(path: &Path, format: Option<Format>) -> Result<(Dataset, IngestSummary)> {
    let text = std::fs::read_to_string(path)?;
    match format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Csv => parse_csv(&text),
        Format::Json => parse_json(&text),
    }
}

pub fn parse_csv(text: &str) -> Result<(Dataset, IngestSummary)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse { line, message: e.to_string() }
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let row = record
            .iter()
            .map(|field| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse { line, message: format!("{field:?} is not a finite number") }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, row));
    }
    finish(rows)
}

pub fn parse_json(text: &str) -> Result<(Dataset, IngestSummary)> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let lines = row_lines(text);
    finish(rows.into_iter().enumerate().map(|(k, r)| (lines.get(k).copied().unwrap_or(0), r)).collect())
}

/// Line on which each inner array of a JSON array of arrays starts.
fn row_lines(text: &str) -> Vec<usize> {
    let (mut line, mut depth) = (1, 0);
    let mut out = Vec::new();
    for c in text.chars() {
        match c {
            '\n' => line += 1,
            '[' => {
                depth += 1;
                if depth == 2 {
                    out.push(line);
                }
            }
            ']' => depth -= 1,
            _ => {}
        }
    }
    out
}

fn finish(rows: Vec<(usize, Vec<f64>)>) -> Result<(Dataset, IngestSummary)> {
    let Some((_, first)) = rows.first() else {
        return Err(invalid("input contains no rows"));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::Parse { line: rows[0].0, message: "empty row".into() });
    }
    let mut seen = HashSet::new();
    let mut duplicates = 0;
    let mut coords = Vec::with_capacity(rows.len() * dim);
    for (line, row) in &rows {
        if row.len() != dim {
            return Err(Error::Parse { line: *line, message: format!("expected {dim} values, found {}", row.len()) });
        }
        if !seen.insert(row.iter().map(|v| (v + 0.0).to_bits()).collect::<Vec<_>>()) {
            duplicates += 1;
        }
        coords.extend(row);
    }
    let summary = IngestSummary { rows: rows.len(), dim, duplicates };
    Ok((Dataset::new(Points::new(dim, coords)?)?, summary))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: format!("{}: {e}", path.display()) })
}

/// Headerless CSV with one point per row.
pub fn points_to_csv(points: &Points) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in points.iter() {
        w.write_record(p.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn write_points(path: &Path, points: &Points, format: Format) -> Result<()> {
    match format {
        Format::Csv => write_atomic(path, &points_to_csv(points)?),
        Format::Json => write_json(path, points),
    }
}

/// Rows `level, dir_index, x1..xd`.
pub fn contours_to_csv(contours: &[QuantileContour]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in contours {
        for (k, p) in c.points.iter().enumerate() {
            let mut rec = vec![c.level.to_string(), k.to_string()];
            rec.extend(p.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(csv_error)?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
