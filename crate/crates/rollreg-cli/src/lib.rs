//! Experiment harness around the `rollreg` library: config-file driven runs
//! over synthetic or libsvm streams, CSV artifacts, static SVG plots, and a
//! built-in quick verification suite.

pub mod config;
pub mod plot;
pub mod report;
pub mod runner;
pub mod svg;
pub mod verify;

use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum Error {
    /// Config-file problem, tagged with the 1-based line it came from.
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    /// Anything else the harness rejects (bad plot kind, empty inputs, ...).
    #[error("{0}")]
    Invalid(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Lib(#[from] rollreg::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
