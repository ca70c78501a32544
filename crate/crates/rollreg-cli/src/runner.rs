//! Experiment execution: expands the sweep grid into (point, seed) jobs,
//! streams each job through its optimizer, and evaluates rolling regret.
//! Jobs run in parallel; each job is internally sequential and fully
//! determined by (resolved config, seed). A failing job becomes a recorded
//! failure; the rest of the grid still runs.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use rollreg::core::{Label, LabeledExample, RngSeed, StepSchedule};
use rollreg::losses::ConvexLoss;
use rollreg::optimizers_convex::{
    momentum_condition_warning, AdamState, Beta1Decay, BoxBound, OgdState,
};
use rollreg::regret::{rolling_regret, RegretReport, WindowOracle, WindowSpec};
use rollreg::relu_net::{
    dnn_adam_gradients, dnn_gd_gradients, dnn_gd_step, expected_loss, g2_entry_bound,
    informative_sample_cosine, init_isotropic, init_near_teacher, xi1_from_assumptions,
    xi2_from_assumptions, ActivationSample, DnnAdamCoeffs, DnnAdamState, ReluNetParams,
};

use crate::config::{
    expand_sweep, ExperimentConfig, InitKind, OffsetsConfig, OptimizerKind, OracleKind,
    ScheduleKind, SourceSelect, TaskLoss,
};
use crate::{Error, Result};

/// Empirical values of the boundedness assumptions, measured over the run.
/// Convex runs fill the first two; the gated-network fields stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionStats {
    /// 2·max over steps of ‖iterate‖∞ (the tightest valid declared D∞).
    pub d_inf: f64,
    /// Max over steps of ‖gradient‖∞.
    pub g_inf: f64,
    /// Teacher second-layer Frobenius norm.
    pub alpha: Option<f64>,
    /// Max over steps of the per-sample |g₂| entry bound.
    pub g2_inf: Option<f64>,
    /// Min positive second-moment-max entry at the end of the run.
    pub mu: Option<f64>,
    /// Min over steps of the error/sample alignment cosine.
    pub min_cosine: Option<f64>,
}

/// One finished run. `wall_time` is observational only and is never
/// serialized; everything else is a pure function of (config, seed).
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    /// Sweep assignment label (`field=value;...`), empty without a sweep.
    pub sweep: String,
    pub source: String,
    pub task: String,
    pub optimizer: String,
    pub schedule: String,
    pub eta1: f64,
    pub t_window: usize,
    pub samples: usize,
    /// Full per-step online loss log (regret always uses this).
    pub loss_log: Vec<f64>,
    /// `(step, loss)` every `run.decimate` steps, for lightweight plotting.
    pub decimated: Vec<(u64, f64)>,
    pub report: RegretReport,
    pub wall_time: Duration,
    pub stats: AssumptionStats,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureRecord {
    pub config_hash: String,
    pub seed: u64,
    pub sweep: String,
    pub error: String,
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Record(Box<RunRecord>),
    Failure(FailureRecord),
}

/// 12-hex-digit digest of the resolved config plus the seed.
pub fn run_hash(cfg: &ExperimentConfig, seed: u64) -> String {
    let mut h = Sha256::new();
    h.update(cfg.canonical_string().as_bytes());
    h.update(format!("seed={seed}").as_bytes());
    hex::encode(h.finalize())[..12].to_string()
}

/// Runs the whole grid: every sweep point crossed with every seed, in
/// declared order (sweep-point major). Parallel up to `run.workers` threads
/// (0 = default pool); output order is independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    let points = expand_sweep(cfg)?;
    let mut jobs = Vec::with_capacity(points.len() * cfg.run.seeds.len());
    for point in &points {
        for &seed in &cfg.run.seeds {
            jobs.push((point.config.clone(), point.label.clone(), seed));
        }
    }
    let decimate = cfg.run.decimate.max(1);
    let exec = || {
        jobs.par_iter()
            .map(|(config, label, seed)| run_one(config, label, *seed, decimate))
            .collect::<Vec<RunOutcome>>()
    };
    if cfg.run.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.run.workers)
            .build()
            .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
        Ok(pool.install(exec))
    } else {
        Ok(exec())
    }
}

struct RunCore {
    loss_log: Vec<f64>,
    report: RegretReport,
    stats: AssumptionStats,
    warnings: Vec<String>,
    samples: usize,
}

fn run_one(cfg: &ExperimentConfig, label: &str, seed: u64, decimate: usize) -> RunOutcome {
    let hash = run_hash(cfg, seed);
    let started = Instant::now();
    match execute(cfg, seed) {
        Ok(core) => {
            let decimated = core
                .loss_log
                .iter()
                .enumerate()
                .filter(|(i, _)| i % decimate == 0)
                .map(|(i, &l)| (i as u64, l))
                .collect();
            RunOutcome::Record(Box::new(RunRecord {
                config_hash: hash,
                seed,
                sweep: label.to_string(),
                source: cfg.source_desc(),
                task: task_desc(cfg),
                optimizer: cfg.optimizer.kind.map_or("unset", OptimizerKind::name).to_string(),
                schedule: cfg.optimizer.schedule.name().to_string(),
                eta1: cfg.optimizer.eta1.unwrap_or(f64::NAN),
                t_window: cfg.windows.t.unwrap_or(0),
                samples: core.samples,
                decimated,
                loss_log: core.loss_log,
                report: core.report,
                wall_time: started.elapsed(),
                stats: core.stats,
                warnings: core.warnings,
            }))
        }
        Err(e) => RunOutcome::Failure(FailureRecord {
            config_hash: hash,
            seed,
            sweep: label.to_string(),
            error: e.to_string(),
        }),
    }
}

fn task_desc(cfg: &ExperimentConfig) -> String {
    match cfg.task.loss {
        Some(TaskLoss::Squared) => "squared".into(),
        Some(TaskLoss::Ridge) => format!("ridge(h={})", cfg.task.h),
        Some(TaskLoss::Hinge) => "hinge".into(),
        Some(TaskLoss::Realizable) => "realizable".into(),
        None => "unset".into(),
    }
}

fn required_t(cfg: &ExperimentConfig) -> Result<usize> {
    cfg.windows.t.ok_or_else(|| Error::Invalid("windows.t is required".into()))
}

fn required_eta1(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.optimizer.eta1.ok_or_else(|| Error::Invalid("optimizer.eta1 is required".into()))
}

/// The paper-style rate for a window length T: η₁/√T, kept defined at the
/// single-sample window T = 0 by flooring the length at 1.
fn build_schedule(cfg: &ExperimentConfig, t_window: usize) -> Result<StepSchedule> {
    let eta1 = required_eta1(cfg)?;
    Ok(match cfg.optimizer.schedule {
        ScheduleKind::WindowScaled => {
            StepSchedule::window_scaled(eta1, (t_window as u64).max(1))?
        }
        ScheduleKind::InverseSqrtTime => StepSchedule::inverse_sqrt_time(eta1)?,
        ScheduleKind::Constant => StepSchedule::constant(eta1)?,
    })
}

fn build_window_spec(cfg: &ExperimentConfig, stream_len: usize) -> Result<WindowSpec> {
    let t = required_t(cfg)?;
    Ok(match &cfg.windows.offsets {
        OffsetsConfig::Covering => WindowSpec::covering(t, stream_len)?,
        OffsetsConfig::Strided { start, stride, count } => {
            WindowSpec::strided(t, *start, *stride, *count)?
        }
        OffsetsConfig::Explicit(offsets) => WindowSpec::explicit(t, offsets.clone())?,
    })
}

/// Hinge class count: explicit override, else the synthetic stream's own
/// count, else one more than the largest class id seen in the stream.
fn hinge_classes(cfg: &ExperimentConfig, stream: &[LabeledExample]) -> Result<usize> {
    if let Some(k) = cfg.task.classes {
        return Ok(k);
    }
    if cfg.source.kind == Some(SourceSelect::SyntheticConvex) {
        return Ok(cfg.stream.classes);
    }
    let mut max_id = None;
    for ex in stream {
        match ex.label {
            Label::ClassId(c) => max_id = Some(max_id.map_or(c, |m: usize| m.max(c))),
            Label::RealTarget(y) => {
                return Err(Error::Invalid(format!(
                    "hinge needs class labels, found real target {y}"
                )))
            }
        }
    }
    let max_id = max_id.ok_or_else(|| Error::Invalid("empty stream".into()))?;
    Ok((max_id + 1).max(2))
}

fn convex_loss_for(cfg: &ExperimentConfig, stream: &[LabeledExample]) -> Result<ConvexLoss> {
    match cfg.task.loss {
        Some(TaskLoss::Squared) => Ok(ConvexLoss::SquaredError),
        Some(TaskLoss::Ridge) => Ok(ConvexLoss::RidgeQuadratic { h: cfg.task.h }),
        Some(TaskLoss::Hinge) => Ok(ConvexLoss::MulticlassHinge { k: hinge_classes(cfg, stream)? }),
        Some(TaskLoss::Realizable) | None => {
            Err(Error::Invalid("convex run needs task.loss in {squared, ridge, hinge}".into()))
        }
    }
}

fn convex_oracle(cfg: &ExperimentConfig, loss: ConvexLoss) -> Result<WindowOracle> {
    let subgradient = || WindowOracle::Subgradient {
        loss,
        iters: cfg.windows.oracle_iters,
        tol: cfg.windows.oracle_tol,
        seed: RngSeed::new(cfg.windows.oracle_seed, 4),
    };
    Ok(match cfg.windows.oracle {
        OracleKind::Auto => match loss {
            ConvexLoss::SquaredError | ConvexLoss::RidgeQuadratic { .. } => {
                WindowOracle::Quadratic { loss }
            }
            ConvexLoss::MulticlassHinge { .. } => subgradient(),
        },
        OracleKind::Quadratic => WindowOracle::Quadratic { loss },
        OracleKind::Subgradient => subgradient(),
        OracleKind::Teacher => {
            return Err(Error::Invalid(
                "the teacher oracle needs a realizable stream".into(),
            ))
        }
    })
}

fn linf(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn execute(cfg: &ExperimentConfig, seed: u64) -> Result<RunCore> {
    match cfg.task.loss {
        Some(TaskLoss::Realizable) => execute_relu(cfg, seed),
        _ => execute_convex(cfg, seed),
    }
}

enum ConvexOpt {
    Ogd(OgdState),
    Adam(AdamState),
    Baseline(AdamState, Beta1Decay),
}

impl ConvexOpt {
    fn w(&self) -> &[f64] {
        match self {
            Self::Ogd(s) => s.w(),
            Self::Adam(s) | Self::Baseline(s, _) => s.w(),
        }
    }
}

fn execute_convex(cfg: &ExperimentConfig, seed: u64) -> Result<RunCore> {
    let source = cfg.stream_source()?;
    let (_, stream) = source.materialize(RngSeed::new(seed, 0))?;
    if stream.is_empty() {
        return Err(Error::Invalid("the stream is empty".into()));
    }
    let dim = stream[0].features.dim();
    let loss = convex_loss_for(cfg, &stream)?;
    let flat = loss.shape(dim).flat_len();
    let t_window = required_t(cfg)?;
    let schedule = build_schedule(cfg, t_window)?;
    let eta1 = required_eta1(cfg)?;
    let bx = match cfg.optimizer.d_inf {
        Some(d) => BoxBound::new(d)?,
        None => BoxBound::disabled(),
    };

    let mut warnings = Vec::new();
    let mut opt = match cfg.optimizer.kind {
        Some(OptimizerKind::Ogd) => ConvexOpt::Ogd(OgdState::new(vec![0.0; flat])?),
        Some(OptimizerKind::ConvgAdam) => {
            let state = AdamState::new(vec![0.0; flat], cfg.optimizer.beta1, cfg.optimizer.beta2)?;
            if let ConvexLoss::RidgeQuadratic { h } = loss {
                if let Some(w) =
                    momentum_condition_warning(cfg.optimizer.beta1, h, schedule.rate(1))
                {
                    warnings.push(w);
                }
            }
            ConvexOpt::Adam(state)
        }
        Some(OptimizerKind::AmsgradBaseline) => {
            let state = AdamState::new(vec![0.0; flat], cfg.optimizer.beta1, cfg.optimizer.beta2)?;
            let decay = match cfg.optimizer.beta1_decay_gamma {
                Some(gamma) => Beta1Decay::Geometric { gamma },
                None => Beta1Decay::Constant,
            };
            ConvexOpt::Baseline(state, decay)
        }
        Some(k) => {
            return Err(Error::Invalid(format!(
                "{} cannot run a convex task",
                k.name()
            )))
        }
        None => return Err(Error::Invalid("optimizer.kind is required".into())),
    };

    let mut loss_log = Vec::with_capacity(stream.len());
    let mut d_inf = 0.0f64;
    let mut g_inf = 0.0f64;
    for (i, ex) in stream.iter().enumerate() {
        let t = (i + 1) as u64;
        d_inf = d_inf.max(2.0 * linf(opt.w()));
        loss_log.push(loss.value(opt.w(), ex)?);
        let g = loss.subgradient(opt.w(), ex)?;
        g_inf = g_inf.max(linf(&g));
        match &mut opt {
            ConvexOpt::Ogd(s) => s.step(&g, schedule.rate(t), &bx)?,
            ConvexOpt::Adam(s) => s.step(&g, schedule.rate(t), &bx)?,
            ConvexOpt::Baseline(s, decay) => s.amsgrad_baseline_step(&g, t, eta1, *decay, &bx)?,
        }
    }

    let spec = build_window_spec(cfg, stream.len())?;
    let oracle = convex_oracle(cfg, loss)?;
    let report = rolling_regret(&loss_log, &stream, &spec, &oracle)?;
    Ok(RunCore {
        loss_log,
        report,
        stats: AssumptionStats {
            d_inf,
            g_inf,
            alpha: None,
            g2_inf: None,
            mu: None,
            min_cosine: None,
        },
        warnings,
        samples: stream.len(),
    })
}

enum ReluOpt {
    Gd { params: ReluNetParams, xi1: f64 },
    Adam(Box<DnnAdamState>),
}

impl ReluOpt {
    fn params(&self) -> &ReluNetParams {
        match self {
            Self::Gd { params, .. } => params,
            Self::Adam(s) => s.params(),
        }
    }
}

fn sample_parts(ex: &LabeledExample) -> Result<(Array1<f64>, f64)> {
    let y = match ex.label {
        Label::RealTarget(y) => y,
        Label::ClassId(c) => {
            return Err(Error::Invalid(format!(
                "realizable streams carry real targets, found class {c}"
            )))
        }
    };
    Ok((Array1::from(ex.features.to_dense()), y))
}

fn relu_d_inf(p: &ReluNetParams) -> f64 {
    let w1 = p.w1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let w2 = p.w2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    2.0 * w1.max(w2)
}

fn grad_linf(g1: &Array1<f64>, g2: &Array2<f64>) -> f64 {
    let a = g1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    g2.iter().fold(a, |m, v| m.max(v.abs()))
}

fn execute_relu(cfg: &ExperimentConfig, seed: u64) -> Result<RunCore> {
    let source = cfg.stream_source()?;
    let (teacher, stream) = source.materialize(RngSeed::new(seed, 0))?;
    let teacher =
        teacher.ok_or_else(|| Error::Invalid("the realizable task needs a teacher stream".into()))?;
    if stream.is_empty() {
        return Err(Error::Invalid("the stream is empty".into()));
    }
    if !matches!(cfg.windows.oracle, OracleKind::Auto | OracleKind::Teacher) {
        return Err(Error::Invalid(
            "realizable streams use the teacher comparator; set windows.oracle = auto or teacher"
                .into(),
        ));
    }
    let (n, d) = (teacher.n(), teacher.d());
    let t_window = required_t(cfg)?;
    let schedule = build_schedule(cfg, t_window)?;
    let rho = cfg.optimizer.rho.unwrap_or(teacher.rho);
    let eps = cfg.optimizer.epsilon;
    let mut mask_rng = RngSeed::new(seed, 1).rng();
    let mut init_rng = RngSeed::new(seed, 2).rng();
    let mut init = |target_norm_sq: f64| -> Result<ReluNetParams> {
        Ok(match cfg.optimizer.init {
            InitKind::NearTeacher => init_near_teacher(
                &teacher,
                cfg.optimizer.init_radius,
                target_norm_sq,
                &mut init_rng,
            )?,
            InitKind::Isotropic => init_isotropic(
                &teacher,
                cfg.optimizer.init_radius,
                target_norm_sq,
                &mut init_rng,
            )?,
        })
    };

    let mut opt = match cfg.optimizer.kind {
        Some(OptimizerKind::DnnGd) => {
            let xi1 = xi1_from_assumptions(cfg.relu.alpha, eps)?;
            let params = init(0.5 + xi1)?;
            ReluOpt::Gd { params, xi1 }
        }
        Some(OptimizerKind::DnnAdam) => {
            let xi2 =
                xi2_from_assumptions(cfg.relu.alpha, cfg.optimizer.g2_inf, cfg.optimizer.mu, eps)?;
            let coeffs = DnnAdamCoeffs {
                beta111: cfg.optimizer.beta111,
                beta121: cfg.optimizer.beta121,
                beta21: cfg.optimizer.beta21,
                beta22: cfg.optimizer.beta22,
                gamma1: cfg.optimizer.gamma1,
                gamma2: cfg.optimizer.gamma2,
                xi2,
            };
            let target = (0.5 + xi2) / (1.0 - cfg.optimizer.beta121);
            let params = init(target)?;
            ReluOpt::Adam(Box::new(DnnAdamState::new(params, coeffs)?))
        }
        Some(k) => {
            return Err(Error::Invalid(format!(
                "{} cannot run the realizable task",
                k.name()
            )))
        }
        None => return Err(Error::Invalid("optimizer.kind is required".into())),
    };

    let mut loss_log = Vec::with_capacity(stream.len());
    let mut d_inf = 0.0f64;
    let mut g_inf = 0.0f64;
    let mut g2_bound = 0.0f64;
    let mut min_cos = f64::INFINITY;
    for (i, ex) in stream.iter().enumerate() {
        let t = (i + 1) as u64;
        let (z, y) = sample_parts(ex)?;
        let p = opt.params();
        d_inf = d_inf.max(relu_d_inf(p));
        loss_log.push(expected_loss(p, &teacher, &z)?);
        min_cos = min_cos.min(informative_sample_cosine(p, &teacher, &z)?);
        g2_bound = g2_bound.max(g2_entry_bound(p, &z, y)?);
        let s1 = ActivationSample::draw(&mut mask_rng, rho, n, d)?;
        let s2 = ActivationSample::draw(&mut mask_rng, rho, n, d)?;
        let rate = schedule.rate(t);
        match &mut opt {
            ReluOpt::Gd { params, xi1 } => {
                let (g1, g2) = dnn_gd_gradients(params, &z, y, &s1, &s2)?;
                g_inf = g_inf.max(grad_linf(&g1, &g2));
                *params = dnn_gd_step(params, &g1, &g2, rate, *xi1)?;
            }
            ReluOpt::Adam(state) => {
                let (g1, g2) = dnn_adam_gradients(state.params(), &z, y, &s1, &s2)?;
                g_inf = g_inf.max(grad_linf(&g1, &g2));
                state.step(&g1, &g2, rate)?;
            }
        }
    }

    let mu = match &opt {
        ReluOpt::Adam(state) => {
            let positive_min = state
                .v1_hat()
                .iter()
                .chain(state.v2_hat().iter())
                .filter(|v| **v > 0.0)
                .fold(f64::INFINITY, |m, v| m.min(*v));
            positive_min.is_finite().then_some(positive_min)
        }
        ReluOpt::Gd { .. } => None,
    };

    let spec = build_window_spec(cfg, stream.len())?;
    let report = rolling_regret(&loss_log, &stream, &spec, &WindowOracle::Teacher)?;
    Ok(RunCore {
        loss_log,
        report,
        stats: AssumptionStats {
            d_inf,
            g_inf,
            alpha: Some(teacher.w2_frobenius()),
            g2_inf: Some(g2_bound),
            mu,
            min_cosine: (min_cos.is_finite()).then_some(min_cos),
        },
        warnings: Vec::new(),
        samples: stream.len(),
    })
}
