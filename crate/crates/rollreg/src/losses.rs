//! Convex per-sample losses with values and subgradients.
//!
//! Three losses cover the convex benchmarks: plain squared error
//! `(wᵀx − y)²`, its ridge-regularized strongly convex variant, and the
//! Crammer–Singer multiclass hinge. All operate on a flat weight slice whose
//! layout is described by [`ModelShape`].

use serde::{Deserialize, Serialize};

use crate::core::{Label, LabeledExample};
use crate::{Error, Result};

/// A convex per-sample loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConvexLoss {
    /// `(wᵀx − y)²` on a real target.
    SquaredError,
    /// `(wᵀx − y)² + (h/2)·‖w‖²`, strongly convex with modulus `h`.
    RidgeQuadratic { h: f64 },
    /// Crammer–Singer hinge `max(0, 1 + max_{k≠y} w_kᵀx − w_yᵀx)` over `k`
    /// weight blocks; ties in the inner max break toward the smallest class
    /// index so subgradients are deterministic.
    MulticlassHinge { k: usize },
}

/// Flat-weight layout for a loss: `k` dense blocks of length `dim`
/// (`k = 1` for the regression losses).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub dim: usize,
    pub k: usize,
}

impl ModelShape {
    /// Length of the flat weight vector: `dim·k`.
    pub fn flat_len(&self) -> usize {
        self.dim * self.k
    }

    /// Whether weights are organized as one block per class.
    pub fn per_class(&self) -> bool {
        self.k > 1
    }
}

impl ConvexLoss {
    /// Ridge loss with validated strong-convexity modulus `h > 0`.
    pub fn ridge_quadratic(h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "ridge modulus must be positive and finite, got {h}"
            )));
        }
        Ok(Self::RidgeQuadratic { h })
    }

    /// Multiclass hinge with validated class count `k ≥ 2`.
    pub fn multiclass_hinge(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidParam(format!(
                "multiclass hinge needs k >= 2 classes, got {k}"
            )));
        }
        Ok(Self::MulticlassHinge { k })
    }

    /// Weight layout for feature dimension `dim`.
    pub fn shape(&self, dim: usize) -> ModelShape {
        let k = match *self {
            Self::MulticlassHinge { k } => k,
            _ => 1,
        };
        ModelShape { dim, k }
    }

    fn check(&self, w: &[f64], ex: &LabeledExample) -> Result<()> {
        let shape = self.shape(ex.features.dim());
        if w.len() != shape.flat_len() {
            return Err(Error::DimMismatch {
                expected: shape.flat_len(),
                got: w.len(),
            });
        }
        match (*self, ex.label) {
            (Self::MulticlassHinge { k }, Label::ClassId(y)) => {
                if y >= k {
                    return Err(Error::LabelMismatch(format!(
                        "class id {y} out of range for {k} classes"
                    )));
                }
                Ok(())
            }
            (Self::MulticlassHinge { .. }, Label::RealTarget(_)) => Err(Error::LabelMismatch(
                "multiclass hinge needs a class-id label".into(),
            )),
            (_, Label::RealTarget(_)) => Ok(()),
            (_, Label::ClassId(_)) => Err(Error::LabelMismatch(
                "regression losses need a real-target label".into(),
            )),
        }
    }

    /// Loss value `f(w)` at one example.
    pub fn value(&self, w: &[f64], ex: &LabeledExample) -> Result<f64> {
        self.check(w, ex)?;
        match *self {
            Self::SquaredError => {
                let r = residual(w, ex)?;
                Ok(r * r)
            }
            Self::RidgeQuadratic { h } => {
                let r = residual(w, ex)?;
                let sq: f64 = w.iter().map(|v| v * v).sum();
                Ok(r * r + 0.5 * h * sq)
            }
            Self::MulticlassHinge { k } => {
                let y = class_id(ex);
                let scores = class_scores(w, ex, k)?;
                let (rival, _) = best_rival(&scores, y);
                Ok((1.0 + scores[rival] - scores[y]).max(0.0))
            }
        }
    }

    /// One member of the subdifferential `∂f(w)`, dense with `w`'s length.
    ///
    /// Smooth losses return the gradient. The hinge returns the active-pair
    /// subgradient when the margin term is strictly positive and zero
    /// otherwise (zero is a valid subgradient exactly at the kink).
    pub fn subgradient(&self, w: &[f64], ex: &LabeledExample) -> Result<Vec<f64>> {
        self.check(w, ex)?;
        let mut g = vec![0.0; w.len()];
        match *self {
            Self::SquaredError => {
                let r = residual(w, ex)?;
                ex.features.add_scaled_into(2.0 * r, &mut g);
            }
            Self::RidgeQuadratic { h } => {
                let r = residual(w, ex)?;
                ex.features.add_scaled_into(2.0 * r, &mut g);
                for (gi, wi) in g.iter_mut().zip(w) {
                    *gi += h * wi;
                }
            }
            Self::MulticlassHinge { k } => {
                let y = class_id(ex);
                let scores = class_scores(w, ex, k)?;
                let (rival, _) = best_rival(&scores, y);
                if 1.0 + scores[rival] - scores[y] > 0.0 {
                    let dim = ex.features.dim();
                    ex.features
                        .add_scaled_into(1.0, &mut g[rival * dim..(rival + 1) * dim]);
                    ex.features
                        .add_scaled_into(-1.0, &mut g[y * dim..(y + 1) * dim]);
                }
            }
        }
        Ok(g)
    }
}

fn residual(w: &[f64], ex: &LabeledExample) -> Result<f64> {
    let y = match ex.label {
        Label::RealTarget(y) => y,
        Label::ClassId(_) => unreachable!("checked by ConvexLoss::check"),
    };
    Ok(ex.features.dot(w)? - y)
}

fn class_id(ex: &LabeledExample) -> usize {
    match ex.label {
        Label::ClassId(y) => y,
        Label::RealTarget(_) => unreachable!("checked by ConvexLoss::check"),
    }
}

fn class_scores(w: &[f64], ex: &LabeledExample, k: usize) -> Result<Vec<f64>> {
    let dim = ex.features.dim();
    (0..k)
        .map(|c| ex.features.dot(&w[c * dim..(c + 1) * dim]))
        .collect()
}

/// Argmax over classes `≠ y`, smallest index on ties.
fn best_rival(scores: &[f64], y: usize) -> (usize, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (c, &s) in scores.iter().enumerate() {
        if c == y {
            continue;
        }
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((c, s)),
        }
    }
    best.expect("k >= 2 guarantees a rival class")
}

/// Central finite-difference check of `subgradient` against `value`.
///
/// Returns the coordinate-wise maximum of
/// `|fd_i − g_i| / max(1, |g_i|)` (a hybrid absolute/relative error that
/// avoids 0/0 on inactive coordinates). The caller is responsible for
/// evaluating away from hinge kinks, where the loss is not differentiable.
pub fn grad_check(loss: &ConvexLoss, w: &[f64], ex: &LabeledExample, h: f64) -> Result<f64> {
    let g = loss.subgradient(w, ex)?;
    let mut wp = w.to_vec();
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        wp[i] = w[i] + h;
        let fp = loss.value(&wp, ex)?;
        wp[i] = w[i] - h;
        let fm = loss.value(&wp, ex)?;
        wp[i] = w[i];
        let fd = (fp - fm) / (2.0 * h);
        let err = (fd - g[i]).abs() / g[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
