use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use strongeq::config::ModelConfig;
use strongeq::twostate::Source;
use strongeq::ModelSpec;

use crate::error::{CliError, CliResult};

/// One expected number checked against a computed one.
#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub source: Source,
    pub pass: bool,
}

impl Comparison {
    pub fn new(
        name: impl Into<String>,
        expected: f64,
        actual: f64,
        tolerance: f64,
        source: Source,
    ) -> Self {
        let abs_error = (actual - expected).abs();
        Comparison {
            name: name.into(),
            expected,
            actual,
            abs_error,
            tolerance,
            source,
            pass: abs_error <= tolerance,
        }
    }
}

/// An expected verdict checked against the classifier.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictComparison {
    pub name: String,
    pub expected: String,
    pub actual: Option<String>,
    pub source: Source,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub version: &'static str,
    pub model_digest: String,
    pub seed: u64,
    pub results: Value,
    pub comparisons: Vec<Comparison>,
    pub verdicts: Vec<VerdictComparison>,
    /// Seconds; the only field that differs between identical runs.
    pub wall_time: f64,
}

/// Hex SHA-256 of the canonical JSON form of the model.
pub fn model_digest(model: &ModelSpec) -> String {
    let text = ModelConfig::from_model(model)
        .map(|c| c.to_json())
        .unwrap_or_else(|_| format!("{model:?}"));
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// A CSV sidecar, written next to the report.
pub struct Sidecar {
    pub name: &'static str,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Sidecar {
    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|v| {
                    if v.is_nan() {
                        String::new()
                    } else {
                        format!("{v:e}")
                    }
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

// A closed pipe downstream (`| head`) is not an error.
fn stdout(line: &str) -> CliResult<()> {
    let mut out = io::stdout().lock();
    match writeln!(out, "{line}").and_then(|()| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

/// Writes `<command>.json` and the sidecars into `dir`, or prints the report
/// to stdout when no directory is given.
pub fn emit(report: &RunReport, sidecars: &[Sidecar], dir: Option<&Path>) -> CliResult<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    match dir {
        None => stdout(&json),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            let name = report.command.split_whitespace().next().unwrap_or("report");
            let path = dir.join(format!("{name}.json"));
            write(&path, &(json + "\n"))?;
            stdout(&path.display().to_string())?;
            for s in sidecars {
                let p = dir.join(s.name);
                write(&p, &s.render())?;
                stdout(&p.display().to_string())?;
            }
            Ok(())
        }
    }
}
