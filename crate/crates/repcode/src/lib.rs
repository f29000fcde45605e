//! Simulator, decoder and analysis toolkit for the quantum repetition code
//! with a single round of syndrome measurement.
//!
//! The pipeline covers:
//!
//! - [`circuit`]: builds the encoding + syndrome-extraction circuit for any
//!   distance `d` and simulates it exactly with a small state-vector backend,
//!   including coherent biased noise (partial X rotations).
//! - [`sampling`]: runs batches of shots grouped into runs and aggregates
//!   outcomes into counts tables, with deterministic per-cell seeding.
//! - [`decoder`]: lookup-table decoders built from counts, full/partial
//!   projection, majority voting and logical-error probabilities.
//! - [`model`]: the analytic binomial error model and least-squares fits
//!   (single-round and constrained two-round) in log space.
//! - [`ingest`]: counts-file parsing, per-qubit statistics, ones-count
//!   histograms and crossover analysis.
//! - [`cli`]: the command implementations behind the `repcode` binary.

pub mod circuit;
pub mod cli;
pub mod decoder;
pub mod ingest;
pub mod model;
pub mod plot;
pub mod sampling;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("resource guard: circuit needs {needed} qubits, limit is {limit}")]
    ResourceGuard { needed: usize, limit: usize },
    #[error("malformed gate sequence: {0}")]
    MalformedSequence(String),
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
