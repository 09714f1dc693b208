//! File formats.
//!
//! Matrices are stored one sample per line: `p` comma-separated values in
//! scientific notation with 17 significant digits, so every `f64` survives
//! a round trip exactly. Lines starting with `#` are header comments and
//! blank lines are ignored. Metadata and reports are JSON.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::DataMatrix;

/// Formats one value with 17 significant digits.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes the columns of `m` as lines, preceded by `# `-prefixed headers.
pub fn write_matrix<W: Write>(mut w: W, m: &DataMatrix, headers: &[String]) -> Result<()> {
    for h in headers {
        for line in h.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    let mat = m.as_matrix();
    let mut line = String::new();
    for c in 0..mat.ncols() {
        line.clear();
        for (r, v) in mat.column(c).iter().enumerate() {
            if r > 0 {
                line.push(',');
            }
            line.push_str(&format_value(*v));
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses the format written by [`write_matrix`]; each line becomes a column.
pub fn read_matrix<R: Read>(r: R) -> Result<DataMatrix> {
    let reader = BufReader::new(r);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let values = trimmed
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|e| {
                    Error::Parse(format!("line {}: bad value {tok:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = samples.first() {
            if first.len() != values.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} values, found {}",
                    lineno + 1,
                    first.len(),
                    values.len()
                )));
            }
        }
        samples.push(values);
    }
    if samples.is_empty() {
        return Err(Error::Parse("no samples found".into()));
    }
    let p = samples[0].len();
    let n = samples.len();
    DataMatrix::new(DMatrix::from_fn(p, n, |i, j| samples[j][i]))
}

pub fn write_matrix_file(path: &Path, m: &DataMatrix, headers: &[String]) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), m, headers)
}

pub fn read_matrix_file(path: &Path) -> Result<DataMatrix> {
    read_matrix(File::open(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
