//! File formats, synthetic datasets and the `rhgnn` experiment driver.
//!
//! Each command writes a run directory holding `config.resolved` (every key that
//! applies to the command, defaults included) and `metrics.txt`, plus:
//!
//! - `gen-synth`: `graph.txt` with feature sidecars, `labels.txt`, `splits.txt`
//! - `train-classify`, `train-linkpred`: `report.log`, `checkpoint.bin`
//! - `embed`: `embeddings.bin`, `gamma.txt`

pub mod commands;
pub mod config;
mod error;
pub mod formats;
pub mod parallel;
pub mod run;
pub mod synth;

pub use commands::{execute, Metrics, Outcome};
pub use config::{Command, RunConfig};
pub use error::{CliError, Result};

/// Parses `args` (program name first) and runs the command.
pub fn run_args<I, T>(args: I) -> Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    execute(&RunConfig::from_args(args)?)
}
