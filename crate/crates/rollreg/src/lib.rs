//! Streaming online learning with rolling-window regret evaluation.
//!
//! The library covers one pass over a data stream: convex losses with
//! subgradients, two constant-stepsize streaming optimizers (plain gradient
//! descent and a max-normalized Adam variant), a two-layer network with
//! probabilistic ReLU activations and its two specialized optimizers, and a
//! regret evaluator that compares the online iterates against per-window
//! offline optima over every window of a fixed length.
//!
//! Modules:
//! - [`core`]: sparse feature vectors, labels, step-size schedules, seeded RNG.
//! - [`losses`]: convex per-sample losses with values and subgradients.
//! - [`optimizers_convex`]: OGD and the max-normalized Adam step, box projection.
//! - [`relu_net`]: the probabilistic-ReLU two-layer model and its optimizers.
//! - [`regret`]: per-window offline oracles and rolling-window regret reports.
//! - [`data`]: libsvm reading, synthetic stream generators, order permutation.

pub mod core;
pub mod data;
pub mod losses;
pub mod optimizers_convex;
pub mod regret;
pub mod relu_net;

use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix dimension mismatch between two arguments.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    /// A label kind incompatible with the requested loss (for example a
    /// class id fed to a regression loss).
    #[error("label/loss mismatch: {0}")]
    LabelMismatch(String),
    /// A non-finite value where a finite one is required (gradients, weights).
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// A parameter outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// The normal system of a least-squares window is singular; the caller
    /// should fall back to the iterative subgradient oracle.
    #[error("singular window system (rank-deficient least squares); use the subgradient oracle")]
    SingularSystem,
    /// A rescaling step hit an exactly zero pre-rescale norm.
    #[error("degenerate rescale: pre-rescale weight norm is zero")]
    DegenerateRescale,
    /// Rejection sampling exceeded its attempt budget.
    #[error("rejection sampling exceeded {attempts} attempts: {hint}")]
    RejectionCap { attempts: u64, hint: String },
    /// A window does not fit inside the recorded stream.
    #[error("window [{start}, {end}] out of range for stream of length {len}")]
    WindowOutOfRange { start: usize, end: usize, len: usize },
    /// A malformed input line (libsvm reader), with its 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    /// Snapshot deserialization failure.
    #[error("snapshot decode: {0}")]
    SnapshotDecode(String),
    /// An I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
