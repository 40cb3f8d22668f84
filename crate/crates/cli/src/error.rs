use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown configuration key `{key}`{}; valid keys: {valid}", at_line(*.line))]
    UnknownKey { key: String, line: Option<usize>, valid: String },

    #[error("`{key}`{}: expected {expected}, got `{value}`", at_line(*.line))]
    BadValue { key: String, line: Option<usize>, expected: &'static str, value: String },

    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("missing required configuration key `{0}`")]
    MissingKey(&'static str),

    #[error("{file}:{line}:{column}: cannot parse `{token}` as a finite number")]
    ParseNumber { file: String, line: usize, column: usize, token: String },

    #[error("{file}:{line}: expected {expected} columns, found {found}")]
    ColumnCount { file: String, line: usize, expected: usize, found: usize },

    #[error("column mapping: {0}")]
    Mapping(String),

    #[error("{0}: no data rows")]
    EmptyProfile(String),

    #[error("{file}: abscissa is not strictly monotone at row {row}")]
    NotMonotone { file: String, row: usize },

    #[error("no overlap between run ({run_lo}..{run_hi}) and reference ({ref_lo}..{ref_hi})")]
    NoOverlap { run_lo: f64, run_hi: f64, ref_lo: f64, ref_hi: f64 },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("run stopped at step {step}: {source}; {}", retained(.checkpoint))]
    Diverged { step: u64, checkpoint: Option<PathBuf>, source: rles_core::Error },

    #[error(transparent)]
    Core(#[from] rles_core::Error),
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

fn retained(path: &Option<PathBuf>) -> String {
    match path {
        Some(p) => format!("last checkpoint retained at {}", p.display()),
        None => "no checkpoint was written".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
