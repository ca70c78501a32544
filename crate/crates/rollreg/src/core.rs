//! Shared numeric types, step-size schedules, and the deterministic RNG
//! contract used by every other module.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A sparse feature vector: strictly increasing indices below `dim`, no
/// explicitly stored zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl FeatureVector {
    /// Builds a sparse vector, validating the index and zero-entry invariants.
    pub fn new(dim: usize, entries: Vec<(usize, f64)>) -> Result<Self> {
        let mut prev: Option<usize> = None;
        for &(idx, val) in &entries {
            if idx >= dim {
                return Err(Error::InvalidParam(format!(
                    "feature index {idx} out of range for dim {dim}"
                )));
            }
            if let Some(p) = prev {
                if idx <= p {
                    return Err(Error::InvalidParam(format!(
                        "feature indices must be strictly increasing, got {p} then {idx}"
                    )));
                }
            }
            if val == 0.0 {
                return Err(Error::InvalidParam(format!(
                    "explicit zero stored at feature index {idx}"
                )));
            }
            if !val.is_finite() {
                return Err(Error::NonFinite("feature value"));
            }
            prev = Some(idx);
        }
        Ok(Self { entries, dim })
    }

    /// Builds a sparse vector from a dense slice, dropping exact zeros.
    pub fn from_dense(values: &[f64]) -> Result<Self> {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        Self::new(values.len(), entries)
    }

    /// Declared dimension of the ambient space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Stored (index, value) pairs in increasing index order.
    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Dense copy of the vector.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Inner product with a dense weight slice of matching dimension.
    pub fn dot(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: w.len(),
            });
        }
        Ok(self.entries.iter().map(|&(i, v)| v * w[i]).sum())
    }

    /// Largest absolute stored value (0 for the empty vector).
    pub fn linf_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    /// Adds `scale` times this vector into a dense accumulator.
    pub fn add_scaled_into(&self, scale: f64, acc: &mut [f64]) {
        for &(i, v) in &self.entries {
            acc[i] += scale * v;
        }
    }
}

/// Inner product of a sparse feature vector with a dense weight slice.
pub fn dot(x: &FeatureVector, w: &[f64]) -> Result<f64> {
    x.dot(w)
}

/// The label of one streamed sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Label {
    /// An integer class id in `[0, K)` for a K-class task.
    ClassId(usize),
    /// A real regression target.
    RealTarget(f64),
}

/// One streamed sample: feature vector plus label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: Label,
}

impl LabeledExample {
    pub fn new(features: FeatureVector, label: Label) -> Self {
        Self { features, label }
    }
}

/// Step-size schedule evaluated at 1-indexed steps.
///
/// `WindowScaled` holds the constant rate η₁/√T tied to a window length T;
/// `InverseSqrtTime` is the diminishing η₁/√t baseline used only for the
/// constant-vs-diminishing streaming contrast.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant { rate: f64 },
    WindowScaled { eta1: f64, window: u64 },
    InverseSqrtTime { eta1: f64 },
}

impl StepSchedule {
    /// Constant rate, validated positive.
    pub fn constant(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "constant rate must be positive and finite, got {rate}"
            )));
        }
        Ok(Self::Constant { rate })
    }

    /// Constant rate η₁/√T for window length T ≥ 1.
    pub fn window_scaled(eta1: f64, window: u64) -> Result<Self> {
        if !(eta1 > 0.0 && eta1.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "eta1 must be positive and finite, got {eta1}"
            )));
        }
        if window == 0 {
            return Err(Error::InvalidParam("window length must be >= 1".into()));
        }
        Ok(Self::WindowScaled { eta1, window })
    }

    /// Diminishing rate η₁/√t.
    pub fn inverse_sqrt_time(eta1: f64) -> Result<Self> {
        if !(eta1 > 0.0 && eta1.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "eta1 must be positive and finite, got {eta1}"
            )));
        }
        Ok(Self::InverseSqrtTime { eta1 })
    }

    /// Rate at step `t` (1-indexed; `t = 0` is rejected).
    pub fn rate(&self, t: u64) -> f64 {
        assert!(t >= 1, "schedules are 1-indexed");
        match *self {
            Self::Constant { rate } => rate,
            Self::WindowScaled { eta1, window } => eta1 / (window as f64).sqrt(),
            Self::InverseSqrtTime { eta1 } => eta1 / (t as f64).sqrt(),
        }
    }
}

/// Alias matching the operation vocabulary used by the rest of the crate.
pub fn schedule_rate(schedule: &StepSchedule, t: u64) -> f64 {
    schedule.rate(t)
}

/// Seed for one deterministic random stream.
///
/// Identical `(seed, stream)` pairs yield identical draw sequences across
/// runs and platforms: the generator is ChaCha12, whose output is defined
/// bitwise, seeded through the version-stable `seed_from_u64`/`set_stream`
/// pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Instantiates the generator for this (seed, stream) pair.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
