//! Rolling-window regret: for each window offset p, the cumulative online
//! loss over samples p..=p+T minus the loss of the best fixed weight vector
//! for that window, with the maximum over offsets as the headline metric.
//!
//! Each window holds T+1 samples (inclusive bounds on both ends). The
//! per-window comparator comes from one of three oracles: an exact
//! normal-equations solve for quadratic losses, an averaged-iterate
//! subgradient method for anything convex, or the generating teacher for
//! realizable streams (whose optimal expected loss is identically zero, so
//! window regret reduces to the online sum). Oracle solves across offsets
//! are independent and run in parallel; the report is assembled in offset
//! order so output is deterministic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::core::{LabeledExample, Label, RngSeed};
use crate::losses::ConvexLoss;
use crate::relu_net::TeacherParams;
use crate::{Error, Result};

/// Which window start indices to evaluate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffsetSpec {
    /// Evaluate exactly these offsets, in the given order.
    Explicit(Vec<usize>),
    /// Evaluate `start, start+stride, …` for `count` offsets.
    Strided { start: usize, stride: usize, count: usize },
}

/// Window size T plus the offsets to slide it over. A window at offset p
/// covers samples p..=p+T, i.e. T+1 of them; T = 0 gives single-sample
/// windows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    t_window: usize,
    offsets: OffsetSpec,
}

impl WindowSpec {
    /// Windows of size `t_window` at exactly `offsets`.
    pub fn explicit(t_window: usize, offsets: Vec<usize>) -> Result<Self> {
        if offsets.is_empty() {
            return Err(Error::InvalidParam("no window offsets given".into()));
        }
        Ok(Self { t_window, offsets: OffsetSpec::Explicit(offsets) })
    }

    /// Windows of size `t_window` at `start, start+stride, …` (`count` of
    /// them).
    pub fn strided(t_window: usize, start: usize, stride: usize, count: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidParam("window stride must be >= 1".into()));
        }
        if count == 0 {
            return Err(Error::InvalidParam("window count must be >= 1".into()));
        }
        Ok(Self { t_window, offsets: OffsetSpec::Strided { start, stride, count } })
    }

    /// Windows of size `t_window` covering a stream of `stream_len` samples
    /// with the default stride `max(1, T/4)`, always including the last
    /// feasible offset so the final window touches the end of the stream.
    pub fn covering(t_window: usize, stream_len: usize) -> Result<Self> {
        if t_window + 1 > stream_len {
            return Err(Error::WindowOutOfRange { start: 0, end: t_window, len: stream_len });
        }
        let last = stream_len - 1 - t_window;
        let stride = (t_window / 4).max(1);
        let mut offsets: Vec<usize> = (0..=last).step_by(stride).collect();
        if *offsets.last().expect("0..=last is nonempty") != last {
            offsets.push(last);
        }
        Self::explicit(t_window, offsets)
    }

    pub fn t_window(&self) -> usize {
        self.t_window
    }

    /// Materializes the offset list.
    pub fn offsets(&self) -> Vec<usize> {
        match &self.offsets {
            OffsetSpec::Explicit(v) => v.clone(),
            OffsetSpec::Strided { start, stride, count } => {
                (0..*count).map(|k| start + k * stride).collect()
            }
        }
    }

    /// Errors unless every window [p, p+T] fits inside a stream of `len`
    /// samples.
    pub fn validate(&self, len: usize) -> Result<()> {
        for p in self.offsets() {
            let end = p + self.t_window;
            if end >= len {
                return Err(Error::WindowOutOfRange { start: p, end, len });
            }
        }
        Ok(())
    }
}

/// Output of one per-window comparator solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// The window's best fixed weights (flat layout of the loss's shape).
    pub w_star: Vec<f64>,
    /// Window objective at `w_star` (sum over the window's samples).
    pub offline_loss: f64,
    /// Iterations spent (0 for closed-form and teacher oracles).
    pub iterations: u64,
    /// Remaining-suboptimality estimate; exact meaning is per-oracle.
    pub residual: f64,
    /// Whether the residual met the oracle's tolerance.
    pub converged: bool,
}

/// Per-window comparator selector for [`rolling_regret`].
#[derive(Debug, Clone)]
pub enum WindowOracle {
    /// Exact normal-equations minimizer; quadratic losses only.
    Quadratic { loss: ConvexLoss },
    /// Averaged-iterate batch subgradient descent; any convex loss.
    Subgradient { loss: ConvexLoss, iters: u64, tol: f64, seed: RngSeed },
    /// Realizable-stream comparator: offline loss is identically zero, so
    /// the loss log must hold expected losses against the teacher.
    Teacher,
}

fn window_dim(window: &[LabeledExample]) -> Result<usize> {
    let first = window
        .first()
        .ok_or_else(|| Error::InvalidParam("empty window".into()))?;
    let dim = first.features.dim();
    for ex in window {
        if ex.features.dim() != dim {
            return Err(Error::DimMismatch { expected: dim, got: ex.features.dim() });
        }
    }
    Ok(dim)
}

fn real_target(ex: &LabeledExample) -> Result<f64> {
    match ex.label {
        Label::RealTarget(y) => Ok(y),
        Label::ClassId(_) => Err(Error::LabelMismatch(
            "quadratic oracle needs real-valued targets".into(),
        )),
    }
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major, n×n) by
/// Cholesky factorization. A nonpositive pivot (relative to the largest
/// original diagonal entry) reports the system as singular.
fn cholesky_solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let diag_max = (0..n).fold(0.0f64, |m, i| m.max(a[i * n + i].abs()));
    let floor = 1e-12 * (1.0 + diag_max);
    for j in 0..n {
        let mut pivot = a[j * n + j];
        for k in 0..j {
            pivot -= a[j * n + k] * a[j * n + k];
        }
        if pivot <= floor {
            return Err(Error::SingularSystem);
        }
        let pivot = pivot.sqrt();
        a[j * n + j] = pivot;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / pivot;
        }
    }
    // Forward substitution L y = b, then back substitution Lᵀ x = y.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Ok(b)
}

/// Exact window minimizer for `SquaredError` or `RidgeQuadratic` via the
/// normal equations. The residual is the gradient norm at the solution;
/// `iterations` is 0. A rank-deficient squared-error window reports
/// [`Error::SingularSystem`], which directs callers to
/// [`oracle_subgradient`] (that method handles flat directions by
/// averaging).
pub fn oracle_quadratic(window: &[LabeledExample], loss: &ConvexLoss) -> Result<OracleResult> {
    let ridge = match loss {
        ConvexLoss::SquaredError => 0.0,
        ConvexLoss::RidgeQuadratic { h } => *h,
        ConvexLoss::MulticlassHinge { .. } => {
            return Err(Error::InvalidParam(
                "quadratic oracle supports only squared and ridge losses".into(),
            ))
        }
    };
    let dim = window_dim(window)?;
    // Stationarity of Σ[(wᵀx−y)² (+ H/2·‖w‖²)] gives
    // (2Σxxᵀ + N·H·I)w = 2Σy·x.
    let mut a = vec![0.0f64; dim * dim];
    let mut b = vec![0.0f64; dim];
    for ex in window {
        let y = real_target(ex)?;
        for &(i, vi) in ex.features.entries() {
            b[i] += 2.0 * y * vi;
            for &(j, vj) in ex.features.entries() {
                a[i * dim + j] += 2.0 * vi * vj;
            }
        }
    }
    if ridge > 0.0 {
        let n_samples = window.len() as f64;
        for i in 0..dim {
            a[i * dim + i] += n_samples * ridge;
        }
    }
    let w_star = cholesky_solve(a, b)?;
    let mut offline_loss = 0.0;
    let mut grad = vec![0.0f64; dim];
    for ex in window {
        offline_loss += loss.value(&w_star, ex)?;
        for (acc, g) in grad.iter_mut().zip(loss.subgradient(&w_star, ex)?) {
            *acc += g;
        }
    }
    let residual = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    Ok(OracleResult { w_star, offline_loss, iterations: 0, residual, converged: true })
}

fn window_objective(window: &[LabeledExample], loss: &ConvexLoss, w: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for ex in window {
        s += loss.value(w, ex)?;
    }
    Ok(s)
}

fn window_mean_subgradient(
    window: &[LabeledExample],
    loss: &ConvexLoss,
    w: &[f64],
) -> Result<Vec<f64>> {
    let mut g = vec![0.0f64; w.len()];
    for ex in window {
        for (acc, gi) in g.iter_mut().zip(loss.subgradient(w, ex)?) {
            *acc += gi;
        }
    }
    let inv = 1.0 / window.len() as f64;
    for gi in &mut g {
        *gi *= inv;
    }
    Ok(g)
}

/// Averaged-iterate batch subgradient descent on the window objective,
/// starting from the zero vector with rate `c/√k` (c set from the initial
/// subgradient magnitude). Returns the best iterate seen, comparing raw and
/// running-average candidates by objective value. The residual is the
/// relative improvement of the best objective over the last 10% of
/// iterations; exceeding `tol` flags the result non-converged (it is still
/// returned, and regret is still computed from it). `seed` is accepted for
/// interface stability but the method is deterministic from the zero start.
pub fn oracle_subgradient(
    window: &[LabeledExample],
    loss: &ConvexLoss,
    iters: u64,
    tol: f64,
    seed: RngSeed,
) -> Result<OracleResult> {
    let _ = seed;
    if iters < 1 {
        return Err(Error::InvalidParam("subgradient oracle needs iters >= 1".into()));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParam(format!("tolerance must be positive, got {tol}")));
    }
    let dim = window_dim(window)?;
    let flat = loss.shape(dim).flat_len();
    let w0 = vec![0.0f64; flat];
    let g0 = window_mean_subgradient(window, loss, &w0)?;
    let g0_norm = g0.iter().map(|g| g * g).sum::<f64>().sqrt();
    if g0_norm == 0.0 {
        let offline_loss = window_objective(window, loss, &w0)?;
        return Ok(OracleResult {
            w_star: w0,
            offline_loss,
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }
    let c = 1.0 / (1.0 + g0_norm);
    let mut w = w0.clone();
    let mut avg = w0.clone();
    let mut best_w = w0.clone();
    let mut best_obj = window_objective(window, loss, &w0)?;
    // Snapshot of the best objective at the 90% mark, for the residual.
    let mark = (iters as f64 * 0.9).ceil() as u64;
    let mut obj_at_mark = best_obj;
    for k in 1..=iters {
        let g = window_mean_subgradient(window, loss, &w)?;
        let rate = c / (k as f64).sqrt();
        for (wi, gi) in w.iter_mut().zip(&g) {
            *wi -= rate * gi;
        }
        let kf = k as f64;
        for (ai, wi) in avg.iter_mut().zip(&w) {
            *ai += (*wi - *ai) / kf;
        }
        for cand in [&w, &avg] {
            let obj = window_objective(window, loss, cand)?;
            if obj < best_obj {
                best_obj = obj;
                best_w.copy_from_slice(cand);
            }
        }
        if k == mark {
            obj_at_mark = best_obj;
        }
    }
    let improvement = obj_at_mark - best_obj;
    let residual = if improvement == 0.0 {
        0.0
    } else {
        improvement / obj_at_mark.abs().max(1e-15)
    };
    Ok(OracleResult {
        w_star: best_w,
        offline_loss: best_obj,
        iterations: iters,
        residual,
        converged: residual <= tol,
    })
}

/// Comparator for realizable teacher streams: the teacher attains expected
/// loss zero on every sample, so every window's offline loss is 0 and its
/// regret is the window's online expected-loss sum. Returns the teacher's
/// weights flattened as w1* followed by row-major w2*.
pub fn oracle_teacher(teacher: &TeacherParams) -> OracleResult {
    let mut w_star = Vec::with_capacity(teacher.n() + teacher.n() * teacher.d());
    w_star.extend(teacher.w1_star.iter().copied());
    w_star.extend(teacher.w2_star.iter().copied());
    OracleResult { w_star, offline_loss: 0.0, iterations: 0, residual: 0.0, converged: true }
}

/// One evaluated window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub offset: usize,
    pub t_window: usize,
    /// Σ of the logged online losses over the window.
    pub online_loss: f64,
    pub offline_loss: f64,
    /// `online_loss − offline_loss`.
    pub regret: f64,
    pub oracle_iters: u64,
    pub oracle_residual: f64,
    pub converged: bool,
}

/// All evaluated windows plus the max-over-offsets headline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub records: Vec<WindowRecord>,
    pub max_regret: f64,
    /// Offset attaining `max_regret` (first one on ties).
    pub argmax_offset: usize,
}

impl RegretReport {
    /// CSV with a fixed header; floats use the shortest round-tripping
    /// representation, so identical reports serialize identically.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "offset,T,online_loss,offline_loss,regret,oracle_iters,oracle_residual,converged\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.offset,
                r.t_window,
                r.online_loss,
                r.offline_loss,
                r.regret,
                r.oracle_iters,
                r.oracle_residual,
                r.converged
            ));
        }
        out
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }
}

/// Evaluates every window in `windows` against the oracle and reports
/// per-offset regrets plus the max over offsets.
///
/// `loss_log[t]` must hold the online loss of the weights that faced sample
/// t: the realized convex loss `f_t(w_t)` for convex runs, or the expected
/// loss against the teacher for gated-network runs (which removes gate noise
/// from the metric; the teacher oracle's zero offline loss matches that
/// convention). `loss_log` and `stream` must have one entry per step.
pub fn rolling_regret(
    loss_log: &[f64],
    stream: &[LabeledExample],
    windows: &WindowSpec,
    oracle: &WindowOracle,
) -> Result<RegretReport> {
    if loss_log.len() != stream.len() {
        return Err(Error::DimMismatch { expected: stream.len(), got: loss_log.len() });
    }
    windows.validate(stream.len())?;
    let t_window = windows.t_window();
    let offsets = windows.offsets();
    let records: Vec<WindowRecord> = offsets
        .into_par_iter()
        .map(|p| -> Result<WindowRecord> {
            let end = p + t_window;
            let online_loss: f64 = loss_log[p..=end].iter().sum();
            let oracle_result = match oracle {
                WindowOracle::Quadratic { loss } => oracle_quadratic(&stream[p..=end], loss)?,
                WindowOracle::Subgradient { loss, iters, tol, seed } => {
                    oracle_subgradient(&stream[p..=end], loss, *iters, *tol, *seed)?
                }
                WindowOracle::Teacher => OracleResult {
                    w_star: Vec::new(),
                    offline_loss: 0.0,
                    iterations: 0,
                    residual: 0.0,
                    converged: true,
                },
            };
            Ok(WindowRecord {
                offset: p,
                t_window,
                online_loss,
                offline_loss: oracle_result.offline_loss,
                regret: online_loss - oracle_result.offline_loss,
                oracle_iters: oracle_result.iterations,
                oracle_residual: oracle_result.residual,
                converged: oracle_result.converged,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = records
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            // Strict comparison keeps the FIRST maximum on ties.
            a.regret
                .partial_cmp(&b.regret)
                .expect("losses are finite")
                .then(ib.cmp(ia))
        })
        .ok_or_else(|| Error::InvalidParam("no window offsets given".into()))?;
    Ok(RegretReport {
        max_regret: best.1.regret,
        argmax_offset: best.1.offset,
        records,
    })
}
