//! Experiment orchestration: seeded, parallel, resumable batches that write
//! `rows.csv`, `summary.csv` and, for φ traces, `traces.csv`.

pub mod config;
pub mod experiments;
pub mod output;
pub mod runner;

use std::path::PathBuf;

pub use config::{Experiment, ExperimentConfig, FamilySpec, Plan};
pub use output::{ResultRow, SummaryRow, TraceRow};
pub use runner::{run, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Core(#[from] netgame_core::Error),
    #[error("{unit}: {source}")]
    Unit {
        unit: String,
        #[source]
        source: Box<BenchError>,
    },
}

impl BenchError {
    fn in_unit(self, u: &experiments::Unit) -> Self {
        BenchError::Unit {
            unit: format!("{}/N={}/trial={}", u.family, u.n, u.trial),
            source: Box::new(self),
        }
    }

    /// True for errors a user fixes by editing the config.
    pub fn is_config(&self) -> bool {
        match self {
            BenchError::Config(_) => true,
            BenchError::Unit { source, .. } => source.is_config(),
            BenchError::Core(e) => matches!(e, netgame_core::Error::InvalidParameter(_)),
            BenchError::Io { .. } => false,
        }
    }
}
