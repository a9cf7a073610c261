//! JSON Lines persistence for experiment records, plus CSV export.
//!
//! A records file starts with one `#` header line naming the tool version,
//! followed by one record per line. Lines are flushed as they are written,
//! so an interrupted sweep leaves a readable prefix.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::record::{ExperimentRecord, TOOL_VERSION};

pub const HEADER_PREFIX: &str = "# onebit-records";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: truncated record (file ends mid-line)")]
    Truncated { path: PathBuf, line: usize },
    #[error("{path}:{line}: written by version {found}, newer than this tool ({supported})")]
    VersionMismatch {
        path: PathBuf,
        line: usize,
        found: String,
        supported: String,
    },
}

/// Appends records to a JSONL file one line at a time.
pub struct RecordWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl RecordWriter {
    /// Creates (or truncates) `path` and writes the header line.
    pub fn create(path: impl AsRef<Path>) -> Result<Self, PersistError> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|source| PersistError::Io {
            path: path.clone(),
            source,
        })?;
        let mut w = Self {
            path,
            out: BufWriter::new(file),
        };
        w.write_line(&format!("{HEADER_PREFIX} version={TOOL_VERSION}"))?;
        Ok(w)
    }

    pub fn append(&mut self, record: &ExperimentRecord) -> Result<(), PersistError> {
        let line = serde_json::to_string(record).expect("records always serialize");
        self.write_line(&line)
    }

    fn write_line(&mut self, line: &str) -> Result<(), PersistError> {
        let io = |source| PersistError::Io {
            path: self.path.clone(),
            source,
        };
        self.out.write_all(line.as_bytes()).map_err(io)?;
        self.out.write_all(b"\n").map_err(io)?;
        self.out.flush().map_err(io)
    }
}

/// Writes `records` to `path`, replacing any existing file.
pub fn persist(records: &[ExperimentRecord], path: impl AsRef<Path>) -> Result<(), PersistError> {
    let mut w = RecordWriter::create(path)?;
    for r in records {
        w.append(r)?;
    }
    Ok(())
}

fn major(version: &str) -> Option<u64> {
    version.split('.').next()?.trim().parse().ok()
}

fn check_version(path: &Path, line: usize, found: &str) -> Result<(), PersistError> {
    let ours = major(TOOL_VERSION).unwrap_or(0);
    match major(found) {
        Some(theirs) if theirs <= ours => Ok(()),
        _ => Err(PersistError::VersionMismatch {
            path: path.to_path_buf(),
            line,
            found: found.to_string(),
            supported: TOOL_VERSION.to_string(),
        }),
    }
}

/// Reads a records file. Comment lines and blank lines are skipped.
pub fn load(path: impl AsRef<Path>) -> Result<Vec<ExperimentRecord>, PersistError> {
    let path = path.as_ref();
    let io = |source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = BufReader::new(File::open(path).map_err(io)?);
    let mut records = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf).map_err(io)? == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let text = buf.trim_end_matches(['\n', '\r']);
        if let Some(rest) = text.strip_prefix('#') {
            if let Some(v) = rest
                .trim()
                .strip_prefix(HEADER_PREFIX.trim_start_matches('#').trim())
                .and_then(|h| h.trim().strip_prefix("version="))
            {
                check_version(path, line_no, v.trim())?;
            }
            continue;
        }
        if text.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ExperimentRecord>(text) {
            Ok(r) => {
                check_version(path, line_no, &r.tool_version)?;
                records.push(r);
            }
            Err(_) if !complete => {
                return Err(PersistError::Truncated {
                    path: path.to_path_buf(),
                    line: line_no,
                })
            }
            Err(e) => {
                return Err(PersistError::Malformed {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(records)
}

pub const CSV_COLUMNS: [&str; 18] = [
    "experiment_id",
    "n",
    "k",
    "R",
    "d",
    "m",
    "epsilon",
    "ensemble",
    "seed",
    "stream",
    "trials",
    "successes",
    "estimate",
    "stderr",
    "wilson_low",
    "wilson_high",
    "wall_time_ms",
    "tool_version",
];

/// Flat CSV table of the estimate columns, one row per record.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        let p = &r.params;
        w.write_record([
            r.experiment_id.clone(),
            p.n.to_string(),
            p.k.to_string(),
            opt(p.dynamic_range),
            opt(p.d),
            p.m.to_string(),
            opt(p.epsilon),
            p.ensemble.to_string(),
            r.seed.seed.to_string(),
            r.seed.stream.to_string(),
            r.trials.to_string(),
            r.successes.to_string(),
            r.estimate.to_string(),
            r.stderr.to_string(),
            r.wilson_low.to_string(),
            r.wilson_high.to_string(),
            r.wall_time_ms.to_string(),
            r.tool_version.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
