//! A two-layer network whose ReLU activations are modeled as independent
//! Bernoulli(ρ) gates, with its two norm-preserving streaming optimizers.
//!
//! The model computes `w1ᵀσ(w2·z)` where each activation draw σ zeroes
//! coordinates independently with probability 1−ρ. Because the same draw is
//! applied both to the hidden pre-activation `w2·z` (length n) and to the
//! raw input `z` (length d) inside the gradient formulas, one realization is
//! represented as an [`ActivationSample`] holding both masks. Two
//! independent realizations σ₁, σ₂ per streamed sample make the product
//! loss an unbiased estimate of a closed-form quadratic objective, and both
//! gradient estimators unbiased for its gradient — the identities the
//! Monte-Carlo tests pin down.
//!
//! Both optimizers exploit positive homogeneity
//! `f(c·w1, w2/c) = f(w1, w2)`: after the gradient move they rescale `w1`
//! onto a fixed-norm sphere and scale `w2` reciprocally, which leaves the
//! represented function (and the product `w1ᵀw2`) unchanged.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Second-layer vector `w1` (length n) and first-layer matrix `w2` (n×d).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNetParams {
    pub w1: Array1<f64>,
    pub w2: Array2<f64>,
}

impl ReluNetParams {
    pub fn new(w1: Array1<f64>, w2: Array2<f64>) -> Result<Self> {
        if w1.len() != w2.nrows() {
            return Err(Error::DimMismatch { expected: w2.nrows(), got: w1.len() });
        }
        if w1.iter().chain(w2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self { w1, w2 })
    }

    /// Hidden width n.
    pub fn n(&self) -> usize {
        self.w1.len()
    }

    /// Input dimension d.
    pub fn d(&self) -> usize {
        self.w2.ncols()
    }

    /// The collapsed linear map `w1ᵀw2` as a d-vector.
    pub fn product(&self) -> Array1<f64> {
        self.w2.t().dot(&self.w1)
    }

    /// Self-describing text snapshot; round-trips bit-exactly.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("finite params serialize")
    }

    pub fn from_snapshot_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s).map_err(|e| Error::SnapshotDecode(e.to_string()))?;
        Self::new(p.w1, p.w2)
    }
}

/// One Bernoulli(ρ) gate vector; a false bit zeroes that coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationMask {
    bits: Vec<bool>,
    rho: f64,
}

impl ActivationMask {
    /// Test/limit constructor: every gate open (Bernoulli(1)).
    pub fn all_true(len: usize) -> Self {
        Self { bits: vec![true; len], rho: 1.0 }
    }

    /// Test/limit constructor: every gate closed (Bernoulli(0)).
    pub fn all_false(len: usize) -> Self {
        Self { bits: vec![false; len], rho: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// The success probability this mask was drawn with.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Gates a vector: keeps coordinates with open bits, zeroes the rest.
    /// Panics if the lengths differ (callers validate dimensions first).
    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        assert_eq!(v.len(), self.bits.len(), "mask/vector length mismatch");
        Array1::from_iter(
            v.iter()
                .zip(&self.bits)
                .map(|(&x, &b)| if b { x } else { 0.0 }),
        )
    }
}

/// Draws one gate vector with independent Bernoulli(rho) bits, `0 < rho ≤ 1`.
pub fn sample_mask<R: Rng>(rng: &mut R, rho: f64, len: usize) -> Result<ActivationMask> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "activation probability must lie in (0, 1], got {rho}"
        )));
    }
    let bits = (0..len).map(|_| rng.gen_bool(rho)).collect();
    Ok(ActivationMask { bits, rho })
}

/// One full activation realization: a hidden-layer gate vector (length n,
/// applied to `w2·z`) and an input gate vector (length d, applied to `z`).
/// Both parts are independent draws with the same ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSample {
    pub hidden: ActivationMask,
    pub input: ActivationMask,
}

impl ActivationSample {
    /// Draws both parts from `rng` (hidden bits first, then input bits).
    pub fn draw<R: Rng>(rng: &mut R, rho: f64, n: usize, d: usize) -> Result<Self> {
        Ok(Self {
            hidden: sample_mask(rng, rho, n)?,
            input: sample_mask(rng, rho, d)?,
        })
    }

    pub fn all_true(n: usize, d: usize) -> Self {
        Self { hidden: ActivationMask::all_true(n), input: ActivationMask::all_true(d) }
    }

    pub fn all_false(n: usize, d: usize) -> Self {
        Self { hidden: ActivationMask::all_false(n), input: ActivationMask::all_false(d) }
    }
}

/// The fixed generating network behind a realizable stream: labels are
/// `y = ρ·w1*ᵀw2*·z`, which makes the optimal expected loss zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherParams {
    pub w1_star: Array1<f64>,
    pub w2_star: Array2<f64>,
    pub rho: f64,
}

impl TeacherParams {
    pub fn new(w1_star: Array1<f64>, w2_star: Array2<f64>, rho: f64) -> Result<Self> {
        if w1_star.len() != w2_star.nrows() {
            return Err(Error::DimMismatch { expected: w2_star.nrows(), got: w1_star.len() });
        }
        if w1_star.iter().chain(w2_star.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("teacher parameters"));
        }
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "teacher rho must lie in (0, 1], got {rho}"
            )));
        }
        Ok(Self { w1_star, w2_star, rho })
    }

    pub fn n(&self) -> usize {
        self.w1_star.len()
    }

    pub fn d(&self) -> usize {
        self.w2_star.ncols()
    }

    /// The collapsed teacher map `w1*ᵀw2*` as a d-vector.
    pub fn product(&self) -> Array1<f64> {
        self.w2_star.t().dot(&self.w1_star)
    }

    /// Frobenius norm of `w2*` (the norm bound α of a stream this teacher
    /// generated).
    pub fn w2_frobenius(&self) -> f64 {
        self.w2_star.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The label this teacher assigns to `z`: `ρ·w1*ᵀw2*·z`.
    pub fn label_for(&self, z: &Array1<f64>) -> Result<f64> {
        if z.len() != self.d() {
            return Err(Error::DimMismatch { expected: self.d(), got: z.len() });
        }
        Ok(self.rho * self.w1_star.dot(&self.w2_star.dot(z)))
    }
}

fn check_sample_dims(p: &ReluNetParams, z: &Array1<f64>) -> Result<()> {
    if z.len() != p.d() {
        return Err(Error::DimMismatch { expected: p.d(), got: z.len() });
    }
    Ok(())
}

fn check_mask_len(mask: &ActivationMask, expected: usize, what: &'static str) -> Result<()> {
    if mask.len() != expected {
        return Err(Error::InvalidParam(format!(
            "{what} mask has length {}, expected {expected}",
            mask.len()
        )));
    }
    Ok(())
}

/// Single-draw loss `½(w1ᵀ(m1⊙w2z) − y)(w1ᵀ(m2⊙w2z) − y)`.
///
/// The two factors use independent gate draws, so a single evaluation can be
/// negative; only its expectation is a squared error (see [`expected_loss`]).
pub fn stochastic_loss(
    p: &ReluNetParams,
    z: &Array1<f64>,
    y: f64,
    mask1: &ActivationMask,
    mask2: &ActivationMask,
) -> Result<f64> {
    check_sample_dims(p, z)?;
    check_mask_len(mask1, p.n(), "first hidden")?;
    check_mask_len(mask2, p.n(), "second hidden")?;
    let h = p.w2.dot(z);
    let r1 = p.w1.dot(&mask1.apply(&h)) - y;
    let r2 = p.w1.dot(&mask2.apply(&h)) - y;
    Ok(0.5 * r1 * r2)
}

/// Exact conditional expectation of [`stochastic_loss`] over the two gate
/// draws, for labels generated by `teacher`:
/// `(ρ²/2)·((w1ᵀw2 − w1*ᵀw2*)·z)²`. Zero exactly at the teacher.
pub fn expected_loss(p: &ReluNetParams, teacher: &TeacherParams, z: &Array1<f64>) -> Result<f64> {
    check_sample_dims(p, z)?;
    if teacher.n() != p.n() || teacher.d() != p.d() {
        return Err(Error::DimMismatch { expected: p.d(), got: teacher.d() });
    }
    let gap = p.product().dot(z) - teacher.product().dot(z);
    let rho2 = teacher.rho * teacher.rho;
    Ok(0.5 * rho2 * gap * gap)
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

fn check_gradient_inputs(
    p: &ReluNetParams,
    z: &Array1<f64>,
    y: f64,
    s1: &ActivationSample,
    s2: &ActivationSample,
) -> Result<()> {
    check_sample_dims(p, z)?;
    if !y.is_finite() {
        return Err(Error::NonFinite("label"));
    }
    check_mask_len(&s1.hidden, p.n(), "first hidden")?;
    check_mask_len(&s2.hidden, p.n(), "second hidden")?;
    check_mask_len(&s1.input, p.d(), "first input")?;
    check_mask_len(&s2.input, p.d(), "second input")?;
    Ok(())
}

/// Symmetrized gradient pair: each direction averages the two role
/// assignments of the gate draws,
/// `g1 = ½r₁·σ₂(w2z) + ½r₂·σ₁(w2z)` and
/// `g2 = w1·(½r₁·σ₂(z) + ½r₂·σ₁(z))ᵀ`,
/// where `rᵢ = w1ᵀσᵢ(w2z) − y`. The input gates apply to `z` itself, not to
/// `w2z`.
pub fn dnn_gd_gradients(
    p: &ReluNetParams,
    z: &Array1<f64>,
    y: f64,
    s1: &ActivationSample,
    s2: &ActivationSample,
) -> Result<(Array1<f64>, Array2<f64>)> {
    check_gradient_inputs(p, z, y, s1, s2)?;
    let h = p.w2.dot(z);
    let a1 = s1.hidden.apply(&h);
    let a2 = s2.hidden.apply(&h);
    let r1 = p.w1.dot(&a1) - y;
    let r2 = p.w1.dot(&a2) - y;
    let g1 = 0.5 * r1 * &a2 + 0.5 * r2 * &a1;
    let u = 0.5 * r1 * &s2.input.apply(z) + 0.5 * r2 * &s1.input.apply(z);
    Ok((g1, outer(&p.w1, &u)))
}

/// One-sided gradient pair used by the adaptive optimizer:
/// `g1 = r₁·σ₂(w2z)` and `g2 = r₁·w1·(σ₂(z))ᵀ` with `r₁ = w1ᵀσ₁(w2z) − y`.
/// Same expectation as [`dnn_gd_gradients`]; twice the per-draw variance.
pub fn dnn_adam_gradients(
    p: &ReluNetParams,
    z: &Array1<f64>,
    y: f64,
    s1: &ActivationSample,
    s2: &ActivationSample,
) -> Result<(Array1<f64>, Array2<f64>)> {
    check_gradient_inputs(p, z, y, s1, s2)?;
    let h = p.w2.dot(z);
    let r1 = p.w1.dot(&s1.hidden.apply(&h)) - y;
    let g1 = r1 * &s2.hidden.apply(&h);
    let u = r1 * &s2.input.apply(z);
    Ok((g1, outer(&p.w1, &u)))
}

/// Norm target `ξ₁ = α/cos(ε)` from the weight-norm bound α and the
/// informative-sample angle ε ∈ [0, π/2).
pub fn xi1_from_assumptions(alpha: f64, epsilon: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParam(format!("alpha must be positive, got {alpha}")));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&epsilon) {
        return Err(Error::InvalidParam(format!(
            "epsilon must lie in [0, pi/2), got {epsilon}"
        )));
    }
    Ok(alpha / epsilon.cos())
}

/// Norm target `ξ₂ = α·G₂∞/(μ·cos(ε))` from the weight-norm bound α, the
/// entrywise gradient bound G₂∞, the smallest nonzero second-moment floor μ,
/// and the informative-sample angle ε ∈ [0, π/2).
pub fn xi2_from_assumptions(alpha: f64, g2_inf: f64, mu: f64, epsilon: f64) -> Result<f64> {
    for (name, v) in [("alpha", alpha), ("g2_inf", g2_inf), ("mu", mu)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParam(format!("{name} must be positive, got {v}")));
        }
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&epsilon) {
        return Err(Error::InvalidParam(format!(
            "epsilon must lie in [0, pi/2), got {epsilon}"
        )));
    }
    Ok(alpha * g2_inf / (mu * epsilon.cos()))
}

/// One plain gradient step followed by the homogeneity rescale:
/// `w1` moves to `w1 − rate·g1` renormalized onto the sphere of squared norm
/// `1/2 + ξ₁`, and `w2` to `(w2 − rate·g2)` scaled by the reciprocal factor,
/// so `w1'ᵀw2'` equals the unrescaled post-gradient product exactly.
pub fn dnn_gd_step(
    p: &ReluNetParams,
    g1: &Array1<f64>,
    g2: &Array2<f64>,
    rate: f64,
    xi1: f64,
) -> Result<ReluNetParams> {
    if g1.len() != p.n() || g2.dim() != p.w2.dim() {
        return Err(Error::DimMismatch { expected: p.n(), got: g1.len() });
    }
    if g1.iter().chain(g2.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParam(format!("rate must be positive, got {rate}")));
    }
    if !(xi1 > 0.0 && xi1.is_finite()) {
        return Err(Error::InvalidParam(format!("xi1 must be positive, got {xi1}")));
    }
    let w1_raw = &p.w1 - &(rate * g1);
    let norm = w1_raw.dot(&w1_raw).sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateRescale);
    }
    let target = (0.5 + xi1).sqrt();
    let w1 = &w1_raw * (target / norm);
    let w2 = (&p.w2 - &(rate * g2)) * (norm / target);
    ReluNetParams::new(w1, w2)
}

/// Adaptive optimizer state for the two-layer model: per-layer moment
/// averages with time-decaying first-moment coefficients, a column-max
/// second-moment matrix for `w2`, running maxima, and the fixed `w1` norm
/// target derived from ξ₂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DnnAdamState {
    params: ReluNetParams,
    m1: Array1<f64>,
    m2: Array2<f64>,
    v1: Array1<f64>,
    v2dot: Array2<f64>,
    v2: Array2<f64>,
    v1_hat: Array1<f64>,
    v2_hat: Array2<f64>,
    t: u64,
    beta111: f64,
    beta121: f64,
    beta21: f64,
    beta22: f64,
    gamma1: f64,
    gamma2: f64,
    xi2: f64,
}

/// Coefficient block for [`DnnAdamState::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DnnAdamCoeffs {
    /// Initial first-moment coefficient for the w1 side (decays as γ₁ᵗ).
    pub beta111: f64,
    /// Initial first-moment coefficient for the w2 side (decays as γ₂ᵗ).
    pub beta121: f64,
    /// Second-moment coefficient for the w1 side.
    pub beta21: f64,
    /// Second-moment coefficient for the w2 side.
    pub beta22: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Norm-target constant; the w1 sphere has squared radius
    /// `(1/2 + ξ₂)/(1 − β₁₂₁)`.
    pub xi2: f64,
}

impl DnnAdamState {
    /// Starts from `params` with all accumulators zero. Enforces every
    /// coefficient in (0, 1), the ratio conditions β₁₁₁/β₂₁ ≤ 1 and
    /// β₁₂₁/β₂₂ ≤ 1, and ξ₂ > 0.
    pub fn new(params: ReluNetParams, c: DnnAdamCoeffs) -> Result<Self> {
        for (name, v) in [
            ("beta111", c.beta111),
            ("beta121", c.beta121),
            ("beta21", c.beta21),
            ("beta22", c.beta22),
            ("gamma1", c.gamma1),
            ("gamma2", c.gamma2),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidParam(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if c.beta111 / c.beta21 > 1.0 {
            return Err(Error::InvalidParam(format!(
                "beta111/beta21 = {} must be <= 1",
                c.beta111 / c.beta21
            )));
        }
        if c.beta121 / c.beta22 > 1.0 {
            return Err(Error::InvalidParam(format!(
                "beta121/beta22 = {} must be <= 1",
                c.beta121 / c.beta22
            )));
        }
        if !(c.xi2 > 0.0 && c.xi2.is_finite()) {
            return Err(Error::InvalidParam(format!("xi2 must be positive, got {}", c.xi2)));
        }
        let (n, d) = (params.n(), params.d());
        Ok(Self {
            params,
            m1: Array1::zeros(n),
            m2: Array2::zeros((n, d)),
            v1: Array1::zeros(n),
            v2dot: Array2::zeros((n, d)),
            v2: Array2::zeros((n, d)),
            v1_hat: Array1::zeros(n),
            v2_hat: Array2::zeros((n, d)),
            t: 0,
            beta111: c.beta111,
            beta121: c.beta121,
            beta21: c.beta21,
            beta22: c.beta22,
            gamma1: c.gamma1,
            gamma2: c.gamma2,
            xi2: c.xi2,
        })
    }

    pub fn params(&self) -> &ReluNetParams {
        &self.params
    }

    pub fn m1(&self) -> &Array1<f64> {
        &self.m1
    }

    pub fn m2(&self) -> &Array2<f64> {
        &self.m2
    }

    pub fn v1(&self) -> &Array1<f64> {
        &self.v1
    }

    pub fn v2(&self) -> &Array2<f64> {
        &self.v2
    }

    pub fn v1_hat(&self) -> &Array1<f64> {
        &self.v1_hat
    }

    pub fn v2_hat(&self) -> &Array2<f64> {
        &self.v2_hat
    }

    /// Completed steps.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Squared norm every post-step `w1` is rescaled to:
    /// `(1/2 + ξ₂)/(1 − β₁₂₁)`. The w2-side constant β₁₂₁ in the w1 target
    /// is intentional, matching the update rule exactly as specified.
    pub fn w1_norm_sq_target(&self) -> f64 {
        (0.5 + self.xi2) / (1.0 - self.beta121)
    }

    /// One adaptive step. With `t` the new 1-indexed step number:
    /// first-moment coefficients decay as `β₁₁ₜ = β₁₁₁γ₁ᵗ`,
    /// `β₁₂ₜ = β₁₂₁γ₂ᵗ`; `v1` and `v̇2` average squared gradients; `v2` is
    /// the column-wise maximum of `|v̇2|` (so every column of `v2` is
    /// constant); `v̂1`, `v̂2` keep running maxima; both weight moves divide
    /// by `√v̂` with the exact-zero convention; then `w1` is rescaled to the
    /// fixed sphere and `w2` scaled reciprocally, preserving `w1ᵀw2`.
    pub fn step(&mut self, g1: &Array1<f64>, g2: &Array2<f64>, rate: f64) -> Result<()> {
        let (n, d) = (self.params.n(), self.params.d());
        if g1.len() != n || g2.dim() != (n, d) {
            return Err(Error::DimMismatch { expected: n, got: g1.len() });
        }
        if g1.iter().chain(g2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParam(format!("rate must be positive, got {rate}")));
        }
        let t_new = self.t + 1;
        let beta11t = self.beta111 * self.gamma1.powi(t_new as i32);
        let beta12t = self.beta121 * self.gamma2.powi(t_new as i32);

        self.m1 = beta11t * &self.m1 + (1.0 - beta11t) * g1;
        self.m2 = beta12t * &self.m2 + (1.0 - beta12t) * g2;
        self.v1 = self.beta21 * &self.v1 + (1.0 - self.beta21) * &g1.mapv(|x| x * x);
        self.v2dot = self.beta22 * &self.v2dot + (1.0 - self.beta22) * &g2.mapv(|x| x * x);

        let mut colmax = vec![0.0f64; d];
        for (j, cm) in colmax.iter_mut().enumerate() {
            for i in 0..n {
                *cm = cm.max(self.v2dot[[i, j]].abs());
            }
        }
        self.v2 = Array2::from_shape_fn((n, d), |(_, j)| colmax[j]);

        for (h, v) in self.v1_hat.iter_mut().zip(self.v1.iter()) {
            if *v > *h {
                *h = *v;
            }
        }
        for (h, v) in self.v2_hat.iter_mut().zip(self.v2.iter()) {
            if *v > *h {
                *h = *v;
            }
        }

        let mut w1_raw = self.params.w1.clone();
        for i in 0..n {
            if self.v1_hat[i] > 0.0 {
                w1_raw[i] -= rate * self.m1[i] / self.v1_hat[i].sqrt();
            }
        }
        let mut w2_raw = self.params.w2.clone();
        for i in 0..n {
            for j in 0..d {
                if self.v2_hat[[i, j]] > 0.0 {
                    w2_raw[[i, j]] -= rate * self.m2[[i, j]] / self.v2_hat[[i, j]].sqrt();
                }
            }
        }

        let norm = w1_raw.dot(&w1_raw).sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateRescale);
        }
        let target = self.w1_norm_sq_target().sqrt();
        self.params.w1 = &w1_raw * (target / norm);
        self.params.w2 = &w2_raw * (norm / target);
        self.t = t_new;
        Ok(())
    }

    /// Self-describing text snapshot; round-trips bit-exactly.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("finite state serializes")
    }

    pub fn from_snapshot_json(s: &str) -> Result<Self> {
        let st: Self =
            serde_json::from_str(s).map_err(|e| Error::SnapshotDecode(e.to_string()))?;
        let (n, d) = (st.params.n(), st.params.d());
        if st.m1.len() != n
            || st.v1.len() != n
            || st.v1_hat.len() != n
            || st.m2.dim() != (n, d)
            || st.v2dot.dim() != (n, d)
            || st.v2.dim() != (n, d)
            || st.v2_hat.dim() != (n, d)
        {
            return Err(Error::SnapshotDecode("accumulator shape mismatch".into()));
        }
        Ok(st)
    }
}

/// Alignment `|Δᵀz|/(‖Δ‖‖z‖)` between the collapsed weight error
/// `Δ = w1ᵀw2 − w1*ᵀw2*` and the sample `z`. Returns 1.0 when Δ = 0 (the
/// informative-sample condition only constrains nonzero errors); a zero
/// sample is an error.
pub fn informative_sample_cosine(
    p: &ReluNetParams,
    teacher: &TeacherParams,
    z: &Array1<f64>,
) -> Result<f64> {
    check_sample_dims(p, z)?;
    if teacher.n() != p.n() || teacher.d() != p.d() {
        return Err(Error::DimMismatch { expected: p.d(), got: teacher.d() });
    }
    let z_norm = z.dot(z).sqrt();
    if z_norm == 0.0 {
        return Err(Error::InvalidParam("zero sample has no direction".into()));
    }
    let delta = p.product() - teacher.product();
    let d_norm = delta.dot(&delta).sqrt();
    if d_norm == 0.0 {
        return Ok(1.0);
    }
    Ok(delta.dot(z).abs() / (d_norm * z_norm))
}

/// Per-sample analytic bound on `|[g2]ᵢⱼ|` over every possible gate
/// realization: `(Σᵢ|w1ᵢ(w2z)ᵢ| + |y|)·maxᵢ|w1ᵢ|·maxⱼ|zⱼ|`. The maximum of
/// this quantity over a generated stream is a valid declared G₂∞ for runs on
/// that stream (both gradient estimators respect it).
pub fn g2_entry_bound(p: &ReluNetParams, z: &Array1<f64>, y: f64) -> Result<f64> {
    check_sample_dims(p, z)?;
    let h = p.w2.dot(z);
    let s: f64 = p.w1.iter().zip(h.iter()).map(|(a, b)| (a * b).abs()).sum();
    let w1_max = p.w1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let z_max = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((s + y.abs()) * w1_max * z_max)
}

/// Initialization near the teacher: perturbs `w1*` and `w2*` by Gaussian
/// directions scaled to relative radius `rel_radius`, then moves the pair
/// along its homogeneity orbit so `‖w1‖² = target_norm_sq` (the function
/// represented is unchanged by that rescale).
pub fn init_near_teacher<R: Rng>(
    teacher: &TeacherParams,
    rel_radius: f64,
    target_norm_sq: f64,
    rng: &mut R,
) -> Result<ReluNetParams> {
    if !(rel_radius >= 0.0 && rel_radius.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "perturbation radius must be >= 0, got {rel_radius}"
        )));
    }
    if !(target_norm_sq > 0.0 && target_norm_sq.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "target norm^2 must be positive, got {target_norm_sq}"
        )));
    }
    let (n, d) = (teacher.n(), teacher.d());
    let w1_base = perturb_vec(&teacher.w1_star, rel_radius, rng);
    let w2_base = perturb_mat(&teacher.w2_star, rel_radius, rng);
    rescale_to_sphere(w1_base, w2_base, target_norm_sq, n, d)
}

/// Initialization with an isotropic random `w1` on the target sphere and
/// `w2` at the teacher plus a relative-radius perturbation.
pub fn init_isotropic<R: Rng>(
    teacher: &TeacherParams,
    w2_rel_radius: f64,
    target_norm_sq: f64,
    rng: &mut R,
) -> Result<ReluNetParams> {
    if !(target_norm_sq > 0.0 && target_norm_sq.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "target norm^2 must be positive, got {target_norm_sq}"
        )));
    }
    let (n, d) = (teacher.n(), teacher.d());
    let w1 = gaussian_vec(n, rng);
    let w2 = perturb_mat(&teacher.w2_star, w2_rel_radius, rng);
    rescale_to_sphere(w1, w2, target_norm_sq, n, d)
}

fn rescale_to_sphere(
    w1: Array1<f64>,
    w2: Array2<f64>,
    target_norm_sq: f64,
    n: usize,
    d: usize,
) -> Result<ReluNetParams> {
    let _ = (n, d);
    let norm = w1.dot(&w1).sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateRescale);
    }
    let c = target_norm_sq.sqrt() / norm;
    ReluNetParams::new(&w1 * c, &w2 / c)
}

fn gaussian_vec<R: Rng>(len: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_iter((0..len).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)))
}

fn perturb_vec<R: Rng>(base: &Array1<f64>, rel: f64, rng: &mut R) -> Array1<f64> {
    if rel == 0.0 {
        return base.clone();
    }
    let dir = gaussian_vec(base.len(), rng);
    let dn = dir.dot(&dir).sqrt();
    if dn == 0.0 {
        return base.clone();
    }
    let scale = rel * base.dot(base).sqrt() / dn;
    base + &(dir * scale)
}

fn perturb_mat<R: Rng>(base: &Array2<f64>, rel: f64, rng: &mut R) -> Array2<f64> {
    if rel == 0.0 {
        return base.clone();
    }
    let dir = Array2::from_shape_fn(base.dim(), |_| {
        rng.sample::<f64, _>(rand_distr::StandardNormal)
    });
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    if dn == 0.0 {
        return base.clone();
    }
    let fro = base.iter().map(|v| v * v).sum::<f64>().sqrt();
    base + &(dir * (rel * fro / dn))
}
