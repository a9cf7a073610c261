//! Plain-text matrix files.
//!
//! Line 1 is `m n ensemble seed` (`seed` is `none` for matrices without
//! one), followed by `m` rows of `n` space-separated decimals in scientific
//! notation with 17 significant digits. Lines starting with `#` are ignored.

use std::io::{BufRead, Write};

use onebit_core::{Ensemble, MeasurementMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("matrix: {0}")]
    Core(#[from] onebit_core::Error),
}

pub fn write_matrix<W: Write>(a: &MeasurementMatrix, mut out: W) -> std::io::Result<()> {
    let seed = a.seed().map_or_else(|| "none".to_string(), |s| s.to_string());
    writeln!(out, "{} {} {} {}", a.m(), a.n(), a.ensemble(), seed)?;
    for row in a.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(out, "{}", cells.join(" "))?;
    }
    out.flush()
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<MeasurementMatrix, MatrixFileError> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|t| (i + 1, t)))
        .filter(|l| match l {
            Ok((_, t)) => !t.trim_start().starts_with('#') && !t.trim().is_empty(),
            Err(_) => true,
        });
    let (hline, header) = lines.next().transpose()?.ok_or(MatrixFileError::Parse {
        line: 0,
        message: "empty matrix file".into(),
    })?;
    let bad = |line: usize, message: String| MatrixFileError::Parse { line, message };
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(bad(hline, format!("header needs `m n ensemble seed`, got '{header}'")));
    }
    let m: usize = fields[0]
        .parse()
        .map_err(|e| bad(hline, format!("bad row count: {e}")))?;
    let n: usize = fields[1]
        .parse()
        .map_err(|e| bad(hline, format!("bad column count: {e}")))?;
    let ensemble: Ensemble = fields[2].parse().map_err(|e| bad(hline, format!("{e}")))?;
    let seed = match fields[3] {
        "none" => None,
        s => Some(
            onebit_core::ensembles::RngSpec::parse_seed(s).map_err(|e| bad(hline, e.to_string()))?,
        ),
    };
    let mut entries = Vec::with_capacity(m * n);
    for row in 0..m {
        let (line, text) = lines
            .next()
            .transpose()?
            .ok_or_else(|| bad(hline, format!("expected {m} rows, found {row}")))?;
        let before = entries.len();
        for cell in text.split_whitespace() {
            entries.push(
                cell.parse::<f64>()
                    .map_err(|e| bad(line, format!("bad number '{cell}': {e}")))?,
            );
        }
        if entries.len() - before != n {
            return Err(bad(line, format!("expected {n} entries, found {}", entries.len() - before)));
        }
    }
    if let Some(extra) = lines.next().transpose()? {
        return Err(bad(extra.0, "unexpected data after the last row".into()));
    }
    Ok(MeasurementMatrix::new(m, n, entries, ensemble, seed)?)
}
