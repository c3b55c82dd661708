//! Experiment runner behind the `nhdeco` binary: configuration, figure
//! presets, and concurrent parameter scans with deterministic outputs.

pub mod config;
pub mod presets;
pub mod run;

pub use config::{resolve, Experiment, ExperimentConfig, Overrides, Resolved, ScanAxes};
pub use run::{expand, run_scan, RunReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] nhdeco::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Core(_) => 2,
            CliError::Io(_) | CliError::Json(_) => 4,
        }
    }
}

/// Exit code when the run finished but some points failed.
pub const EXIT_POINT_FAILURES: u8 = 3;
