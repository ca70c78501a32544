//! The two convex-setting streaming optimizers — plain online gradient
//! descent and a max-normalized Adam variant with constant coefficients —
//! plus box projection and a diminishing-stepsize baseline.
//!
//! The Adam variant keeps `v̂` as the running elementwise maximum of the
//! second-moment average and divides the step by `√v̂` with no epsilon and
//! no bias correction; a coordinate whose `v̂` is exactly zero (possible only
//! when every past gradient there was exactly zero) retains its weight
//! bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An optional L∞ box of half-width `d_inf/2` for iterate projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxBound {
    d_inf: f64,
    enabled: bool,
}

impl BoxBound {
    /// An enabled box `[−d_inf/2, +d_inf/2]` per coordinate.
    pub fn new(d_inf: f64) -> Result<Self> {
        if !(d_inf > 0.0 && d_inf.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "box width must be positive and finite, got {d_inf}"
            )));
        }
        Ok(Self { d_inf, enabled: true })
    }

    /// No projection.
    pub fn disabled() -> Self {
        Self { d_inf: f64::INFINITY, enabled: false }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn d_inf(&self) -> f64 {
        self.d_inf
    }

    fn clamp_in_place(&self, w: &mut [f64]) {
        if self.enabled {
            let h = self.d_inf / 2.0;
            for wi in w {
                *wi = wi.clamp(-h, h);
            }
        }
    }
}

/// Euclidean projection onto the L∞ ball of radius `d_inf/2`: an elementwise
/// clamp. Returns the input unchanged when the box is disabled.
pub fn project_box(w: &[f64], bx: &BoxBound) -> Vec<f64> {
    let mut out = w.to_vec();
    bx.clamp_in_place(&mut out);
    out
}

fn check_gradient(g: &[f64], w_len: usize) -> Result<()> {
    if g.len() != w_len {
        return Err(Error::DimMismatch { expected: w_len, got: g.len() });
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    Ok(())
}

fn check_rate(rate: f64) -> Result<()> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "step rate must be positive and finite, got {rate}"
        )));
    }
    Ok(())
}

/// Online gradient descent state: weights plus a 0-based step counter that
/// counts completed steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgdState {
    w: Vec<f64>,
    t: u64,
}

impl OgdState {
    pub fn new(w0: Vec<f64>) -> Result<Self> {
        if w0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial weights"));
        }
        Ok(Self { w: w0, t: 0 })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Completed steps.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// One update `w ← Π(w − rate·g)`; the projection applies only when the
    /// box is enabled.
    pub fn step(&mut self, g: &[f64], rate: f64, bx: &BoxBound) -> Result<()> {
        check_gradient(g, self.w.len())?;
        check_rate(rate)?;
        for (wi, gi) in self.w.iter_mut().zip(g) {
            *wi -= rate * gi;
        }
        bx.clamp_in_place(&mut self.w);
        self.t += 1;
        Ok(())
    }

    /// Self-describing text snapshot; round-trips bit-exactly (all state is
    /// finite by construction).
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("finite state serializes")
    }

    pub fn from_snapshot_json(s: &str) -> Result<Self> {
        let st: Self =
            serde_json::from_str(s).map_err(|e| Error::SnapshotDecode(e.to_string()))?;
        if st.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::SnapshotDecode("non-finite weights".into()));
        }
        Ok(st)
    }
}

/// β₁ decay rule for the diminishing-stepsize baseline step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Beta1Decay {
    /// β₁ₜ = β₁ for all t.
    Constant,
    /// β₁ₜ = β₁·γ^(t−1) with 0 < γ < 1, so t = 1 uses plain β₁.
    Geometric { gamma: f64 },
}

impl Beta1Decay {
    fn beta1_at(&self, beta1: f64, t: u64) -> Result<f64> {
        match *self {
            Self::Constant => Ok(beta1),
            Self::Geometric { gamma } => {
                if !(gamma > 0.0 && gamma < 1.0) {
                    return Err(Error::InvalidParam(format!(
                        "geometric beta1 decay needs 0 < gamma < 1, got {gamma}"
                    )));
                }
                Ok(beta1 * gamma.powi((t - 1) as i32))
            }
        }
    }
}

/// Max-normalized Adam state: weights, first and second moment averages, the
/// running elementwise maximum `v̂`, and a 0-based completed-step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    w: Vec<f64>,
    m: Vec<f64>,
    v: Vec<f64>,
    v_hat: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
}

impl AdamState {
    /// Starts from `w0` with all accumulators zero. Rejects coefficient pairs
    /// with β₁/√β₂ ≥ 1 or outside (0, 1).
    pub fn new(w0: Vec<f64>, beta1: f64, beta2: f64) -> Result<Self> {
        if w0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial weights"));
        }
        if !(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0) {
            return Err(Error::InvalidParam(format!(
                "betas must lie in (0, 1), got beta1={beta1}, beta2={beta2}"
            )));
        }
        let lambda = beta1 / beta2.sqrt();
        if lambda >= 1.0 {
            return Err(Error::InvalidParam(format!(
                "beta1/sqrt(beta2) = {lambda} must be < 1"
            )));
        }
        let n = w0.len();
        Ok(Self {
            w: w0,
            m: vec![0.0; n],
            v: vec![0.0; n],
            v_hat: vec![0.0; n],
            t: 0,
            beta1,
            beta2,
        })
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v_hat(&self) -> &[f64] {
        &self.v_hat
    }

    /// Completed steps.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    /// One constant-coefficient update:
    /// `m ← β₁m + (1−β₁)g`, `v ← β₂v + (1−β₂)g⊙g`, `v̂ ← max(v̂, v)`,
    /// then per coordinate `w ← w − rate·m/√v̂`, retaining the previous
    /// weight wherever `v̂` is exactly zero; optional box projection last.
    pub fn step(&mut self, g: &[f64], rate: f64, bx: &BoxBound) -> Result<()> {
        self.step_with_beta1(g, rate, self.beta1, bx)
    }

    /// Diminishing-stepsize baseline: identical accumulator updates but with
    /// rate `alpha/√t` and β₁ₜ from the decay rule. `t` is the 1-indexed step
    /// index (callers normally pass `state.t() + 1`).
    pub fn amsgrad_baseline_step(
        &mut self,
        g: &[f64],
        t: u64,
        alpha: f64,
        decay: Beta1Decay,
        bx: &BoxBound,
    ) -> Result<()> {
        if t < 1 {
            return Err(Error::InvalidParam("baseline step index t must be >= 1".into()));
        }
        let beta1_t = decay.beta1_at(self.beta1, t)?;
        let rate = alpha / (t as f64).sqrt();
        self.step_with_beta1(g, rate, beta1_t, bx)
    }

    fn step_with_beta1(&mut self, g: &[f64], rate: f64, beta1_t: f64, bx: &BoxBound) -> Result<()> {
        check_gradient(g, self.w.len())?;
        check_rate(rate)?;
        for (i, &gi) in g.iter().enumerate() {
            self.m[i] = beta1_t * self.m[i] + (1.0 - beta1_t) * gi;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * gi * gi;
            if self.v[i] > self.v_hat[i] {
                self.v_hat[i] = self.v[i];
            }
            if self.v_hat[i] > 0.0 {
                self.w[i] -= rate * self.m[i] / self.v_hat[i].sqrt();
            }
        }
        bx.clamp_in_place(&mut self.w);
        self.t += 1;
        Ok(())
    }

    /// Self-describing text snapshot; round-trips bit-exactly (all state is
    /// finite by construction).
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("finite state serializes")
    }

    pub fn from_snapshot_json(s: &str) -> Result<Self> {
        let st: Self =
            serde_json::from_str(s).map_err(|e| Error::SnapshotDecode(e.to_string()))?;
        let n = st.w.len();
        if st.m.len() != n || st.v.len() != n || st.v_hat.len() != n {
            return Err(Error::SnapshotDecode("accumulator length mismatch".into()));
        }
        if !(st.beta1 > 0.0 && st.beta1 < 1.0 && st.beta2 > 0.0 && st.beta2 < 1.0) {
            return Err(Error::SnapshotDecode("betas out of range".into()));
        }
        Ok(st)
    }
}

/// Momentum-vs-curvature advisory: with a strongly convex loss of modulus
/// `h` and step rate `rate`, first-moment coefficients above
/// `h·rate/(1 + h·rate)` void the constant-rate guarantee. Returns a warning
/// string instead of failing because the optimizer cannot know `h` in
/// general.
pub fn momentum_condition_warning(beta1: f64, h: f64, rate: f64) -> Option<String> {
    let limit = h * rate / (1.0 + h * rate);
    (beta1 > limit).then(|| {
        format!(
            "beta1 = {beta1} exceeds h*rate/(1+h*rate) = {limit:.6}; \
             the strongly-convex constant-rate guarantee does not apply"
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NO_BOX: BoxBound = BoxBound { d_inf: f64::INFINITY, enabled: false };

    #[test]
    fn ogd_single_step_hand_case() {
        let mut s = OgdState::new(vec![0.0, 0.0]).unwrap();
        s.step(&[1.0, -1.0], 0.1, &NO_BOX).unwrap();
        assert_eq!(s.w(), &[-0.1, 0.1]);
        assert_eq!(s.t(), 1);
    }

    #[test]
    fn ogd_zero_gradient_fixes_point() {
        let mut s = OgdState::new(vec![0.0]).unwrap();
        s.step(&[0.0], 123.0, &NO_BOX).unwrap();
        assert_eq!(s.w(), &[0.0]);
    }

    #[test]
    fn ogd_step_clips_to_box() {
        let bx = BoxBound::new(2.0).unwrap();
        let mut s = OgdState::new(vec![0.9]).unwrap();
        s.step(&[-1.0], 0.5, &bx).unwrap();
        assert_eq!(s.w(), &[1.0], "unprojected 1.4 clamps to the box edge");
    }

    #[test]
    fn ogd_rejects_non_finite_gradient() {
        let mut s = OgdState::new(vec![0.0]).unwrap();
        assert!(s.step(&[f64::NAN], 0.1, &NO_BOX).is_err());
        assert!(s.step(&[1.0, 2.0], 0.1, &NO_BOX).is_err());
        assert!(s.step(&[1.0], 0.0, &NO_BOX).is_err());
    }

    #[test]
    fn adam_first_step_hand_trace() {
        let mut s = AdamState::new(vec![0.0], 0.8, 0.81).unwrap();
        s.step(&[4.0], 0.1, &NO_BOX).unwrap();
        // m = 0.2·4, v = 0.19·16; 1e-12 relative (the literals 0.8 and 0.81
        // are not exactly representable).
        assert!((s.m()[0] - 0.8).abs() < 1e-12 * 0.8);
        assert!((s.v()[0] - 3.04).abs() < 1e-12 * 3.04);
        assert_eq!(s.v_hat(), s.v(), "first step raises v_hat to v");
        let expect = -0.1 * 0.8 / 3.04f64.sqrt();
        let rel = (s.w()[0] - expect).abs() / expect.abs();
        assert!(rel < 1e-12, "w = {}, expected {expect}", s.w()[0]);
    }

    #[test]
    fn adam_first_step_magnitude_is_gradient_free() {
        // One step from all-zero accumulators moves by rate·(1−β₁)/√(1−β₂)
        // whatever the gradient magnitude.
        let mut a = AdamState::new(vec![0.0], 0.8, 0.81).unwrap();
        let mut b = AdamState::new(vec![0.0], 0.8, 0.81).unwrap();
        a.step(&[4.0], 0.1, &NO_BOX).unwrap();
        b.step(&[400.0], 0.1, &NO_BOX).unwrap();
        let expect = -0.1 * (1.0 - 0.8) / (1.0f64 - 0.81).sqrt();
        assert!((a.w()[0] - expect).abs() < 1e-15);
        assert!((a.w()[0] - b.w()[0]).abs() < 1e-15);
    }

    #[test]
    fn adam_second_step_with_zero_gradient_hand_trace() {
        let mut s = AdamState::new(vec![0.0], 0.8, 0.81).unwrap();
        s.step(&[4.0], 0.1, &NO_BOX).unwrap();
        let (w1, m1, vhat1) = (s.w()[0], s.m()[0], s.v_hat()[0]);
        s.step(&[0.0], 0.1, &NO_BOX).unwrap();
        assert_eq!(s.v_hat(), &[vhat1], "β₂v₁ ≤ v̂₁ keeps v̂ unchanged");
        let expect = w1 - 0.1 * 0.8 * m1 / vhat1.sqrt();
        assert!((s.w()[0] - expect).abs() < 1e-15, "w still moves by rate·β₁m₁/√v̂₁");
    }

    #[test]
    fn adam_all_zero_gradients_never_move_weights() {
        let w0 = vec![0.25, -1.5, 3.0];
        let mut s = AdamState::new(w0.clone(), 0.8, 0.81).unwrap();
        for _ in 0..50 {
            s.step(&[0.0, 0.0, 0.0], 0.1, &NO_BOX).unwrap();
        }
        assert!(
            s.w().iter().zip(&w0).all(|(a, b)| a.to_bits() == b.to_bits()),
            "all-zero gradient history must leave weights bit-identical"
        );
    }

    #[test]
    fn adam_constructor_rejects_bad_coefficients() {
        assert!(AdamState::new(vec![0.0], 0.95, 0.81).is_err(), "lambda > 1");
        assert!(AdamState::new(vec![0.0], 0.9, 0.81).is_err(), "lambda == 1");
        assert!(AdamState::new(vec![0.0], 0.0, 0.81).is_err());
        assert!(AdamState::new(vec![0.0], 0.8, 1.0).is_err());
        assert!(AdamState::new(vec![0.0], 0.8, 0.81).is_ok());
    }

    #[test]
    fn baseline_step_at_t1_matches_constant_step_rate_alpha() {
        let mut a = AdamState::new(vec![0.5], 0.8, 0.81).unwrap();
        let mut b = AdamState::new(vec![0.5], 0.8, 0.81).unwrap();
        a.amsgrad_baseline_step(&[2.0], 1, 1.0, Beta1Decay::Constant, &NO_BOX)
            .unwrap();
        b.step(&[2.0], 1.0, &NO_BOX).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baseline_step_rate_diminishes_as_inverse_sqrt_t() {
        // At t = 100 the baseline step must equal a constant step with
        // rate alpha/10 from the same state.
        let mut warm = AdamState::new(vec![0.5], 0.8, 0.81).unwrap();
        for _ in 0..99 {
            warm.step(&[1.0], 0.1, &NO_BOX).unwrap();
        }
        let mut a = warm.clone();
        let mut b = warm;
        a.amsgrad_baseline_step(&[2.0], 100, 1.0, Beta1Decay::Constant, &NO_BOX)
            .unwrap();
        b.step(&[2.0], 0.1, &NO_BOX).unwrap();
        assert_eq!(a.w(), b.w());
    }

    #[test]
    fn baseline_geometric_decay_shrinks_beta1() {
        let mut s = AdamState::new(vec![0.0], 0.8, 0.81).unwrap();
        // t = 3 with gamma = 0.5: β₁ₜ = 0.8·0.25 = 0.2; from zero
        // accumulators m = (1−0.2)·g.
        s.amsgrad_baseline_step(&[1.0], 3, 1.0, Beta1Decay::Geometric { gamma: 0.5 }, &NO_BOX)
            .unwrap();
        assert!((s.m()[0] - 0.8).abs() < 1e-15);
        assert!(s
            .amsgrad_baseline_step(&[1.0], 4, 1.0, Beta1Decay::Geometric { gamma: 1.5 }, &NO_BOX)
            .is_err());
    }

    #[test]
    fn project_box_hand_cases() {
        let bx = BoxBound::new(2.0).unwrap();
        assert_eq!(project_box(&[0.3], &bx), vec![0.3]);
        assert_eq!(project_box(&[5.0, -5.0], &bx), vec![1.0, -1.0]);
        assert_eq!(project_box(&[5.0], &BoxBound::disabled()), vec![5.0]);
        assert!(BoxBound::new(0.0).is_err());
    }

    #[test]
    fn momentum_warning_fires_only_above_limit() {
        // h = 1, rate = 0.1: limit = 0.1/1.1 ≈ 0.0909.
        assert!(momentum_condition_warning(0.8, 1.0, 0.1).is_some());
        assert!(momentum_condition_warning(0.05, 1.0, 0.1).is_none());
    }

    #[test]
    fn snapshots_round_trip_bit_exactly() {
        let mut ogd = OgdState::new(vec![0.1, -0.7]).unwrap();
        ogd.step(&[0.3, 1.0 / 3.0], 0.07, &NO_BOX).unwrap();
        let back = OgdState::from_snapshot_json(&ogd.snapshot_json()).unwrap();
        assert_eq!(ogd, back);

        let mut adam = AdamState::new(vec![0.1, -0.7], 0.8, 0.81).unwrap();
        for i in 0..5 {
            adam.step(&[1.0 / (i as f64 + 3.0), -0.2], 0.05, &NO_BOX).unwrap();
        }
        let back = AdamState::from_snapshot_json(&adam.snapshot_json()).unwrap();
        assert_eq!(adam, back);
        assert!(adam
            .w()
            .iter()
            .zip(back.w())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn snapshot_decode_rejects_corrupt_records() {
        assert!(OgdState::from_snapshot_json("{not json").is_err());
        assert!(AdamState::from_snapshot_json(
            r#"{"w":[0.0],"m":[0.0,0.0],"v":[0.0],"v_hat":[0.0],"t":0,"beta1":0.8,"beta2":0.81}"#
        )
        .is_err());
    }
}
