//! Driver library behind the `rles` binary: configuration files,
//! checkpoints, run orchestration and comparison with reference data.

pub mod checkpoint;
pub mod compare;
pub mod config;
pub mod error;
pub mod reference;
pub mod report;
pub mod run;

pub use checkpoint::Checkpoint;
pub use config::{Preset, Setting};
pub use error::{CliError, Result};
pub use reference::{ColumnMap, Quantity, ReferenceProfile};
pub use run::{Manifest, Run};

/// `git describe` output at build time, or the package version.
pub const VERSION: &str = env!("RLES_VERSION");

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "RLES_THREADS";

/// Parses a thread-count setting; empty or absent means "use the default".
pub fn parse_threads(value: Option<&str>) -> Result<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => v.parse::<usize>().ok().filter(|n| *n > 0).map(Some).ok_or_else(|| {
            CliError::BadValue {
                key: THREADS_ENV.to_string(),
                line: None,
                expected: "a positive integer",
                value: v.to_string(),
            }
        }),
    }
}
