//! Reproducibility shell: scenario configuration, labelled random streams,
//! the trial and sweep engines, and CSV emission.

pub mod config;
pub mod csv;
pub mod seed;
pub mod sweep;
pub mod trial;

use thiserror::Error;

use crate::error::ModelError;
use crate::sim::config::ConfigError;

/// Errors from the sweep engine and its outputs.
#[derive(Debug, Error)]
pub enum SimError {
    /// A trial failed, annotated with where it sat in the sweep.
    #[error("{scheme} at {snr_db} dB, trial {trial}: {source}")]
    Trial {
        scheme: &'static str,
        snr_db: f64,
        trial: u64,
        #[source]
        source: ModelError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("refusing to emit an empty report list")]
    EmptyReport,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
