//! CSV and JSON artifacts.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use degpot::Point;
use serde::Serialize;

use crate::error::CliError;

/// Reads `(x, t)` probes from a CSV whose header names the columns `x, y[, z], t`.
pub fn read_points(path: &Path, dimension: usize) -> Result<Vec<(Point, f64)>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.clone();
    let names: &[&str] = if dimension == 2 { &["x", "y", "t"] } else { &["x", "y", "z", "t"] };
    let columns: Vec<usize> = names
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| {
                CliError::Config(format!("{}: missing column `{name}` (expected {names:?})", path.display()))
            })
        })
        .collect::<Result<_, _>>()?;
    let mut out = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut values = [0.0; 4];
        for (slot, &c) in columns.iter().enumerate() {
            let field = record.get(c).unwrap_or("");
            values[slot] = field.parse().map_err(|_| {
                CliError::Config(format!("{}: row {}: `{field}` is not a number", path.display(), row + 2))
            })?;
        }
        let mut x = [0.0; 3];
        x[..dimension].copy_from_slice(&values[..dimension]);
        out.push((x, values[dimension]));
    }
    Ok(out)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout()),
    })
}

/// Writes rows under `header`; stdout when no path is given.
pub fn write_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Point-value rows `x, y[, z], t, value`.
pub fn write_point_values(
    path: Option<&Path>,
    dimension: usize,
    points: &[(Point, f64)],
    values: &[f64],
) -> Result<(), CliError> {
    let header: &[&str] = if dimension == 2 { &["x", "y", "t", "value"] } else { &["x", "y", "z", "t", "value"] };
    let rows: Vec<Vec<f64>> = points
        .iter()
        .zip(values)
        .map(|((x, t), v)| {
            let mut row = x[..dimension].to_vec();
            row.extend([*t, *v]);
            row
        })
        .collect();
    write_csv(path, header, &rows)
}

/// Pretty JSON followed by a newline; stdout when no path is given.
pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut w = sink(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
