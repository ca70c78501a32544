//! Experiment configuration files.
//!
//! The format is flat, line-oriented `key = value` text grouped under
//! `[section]` headers; `#` or `;` at the start of a line marks a comment.
//! Sections: `[source]`, `[stream]`, `[relu]`, `[task]`, `[optimizer]`,
//! `[windows]`, `[sweep]`, `[run]`. Every key in `[sweep]` names a settable
//! field as `section.key` and lists comma-separated values; the run expands
//! the Cartesian grid of all swept fields in file order.
//!
//! Parsing is strict: unknown sections or keys, duplicate keys, and
//! unparseable values are errors carrying the offending line number.

use std::path::{Path, PathBuf};

use rollreg::core::RngSeed;
use rollreg::data::{ConvexStreamConfig, Order, ReluStreamConfig, SourceKind, StreamSource};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceSelect {
    SyntheticConvex,
    SyntheticRelu,
    Libsvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderSelect {
    Natural,
    Permuted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskLoss {
    Squared,
    Ridge,
    Hinge,
    /// Teacher-realizable gated-network stream; the logged metric is the
    /// expected loss against the teacher.
    Realizable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Ogd,
    ConvgAdam,
    AmsgradBaseline,
    DnnGd,
    DnnAdam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ogd => "ogd",
            Self::ConvgAdam => "convg_adam",
            Self::AmsgradBaseline => "amsgrad_baseline",
            Self::DnnGd => "dnn_gd",
            Self::DnnAdam => "dnn_adam",
        }
    }

    pub fn is_relu(self) -> bool {
        matches!(self, Self::DnnGd | Self::DnnAdam)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    WindowScaled,
    InverseSqrtTime,
    Constant,
}

impl ScheduleKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::WindowScaled => "window_scaled",
            Self::InverseSqrtTime => "inverse_sqrt_time",
            Self::Constant => "constant",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    NearTeacher,
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OffsetsConfig {
    /// Stride `max(1, T/4)` from offset 0, always touching the stream end.
    Covering,
    Strided { start: usize, stride: usize, count: usize },
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    /// Pick per task: quadratic losses get the closed form, hinge the
    /// subgradient solver, realizable streams the teacher comparator.
    Auto,
    Quadratic,
    Subgradient,
    Teacher,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSection {
    pub kind: Option<SourceSelect>,
    pub path: Option<PathBuf>,
    pub order: OrderSelect,
    pub order_seed: u64,
    pub repeat: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSection {
    pub dim: usize,
    pub classes: usize,
    pub samples: usize,
    pub margin: f64,
    pub skew: f64,
    pub noise: f64,
    pub shift_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReluSection {
    pub hidden: usize,
    pub input: usize,
    pub rho: f64,
    pub alpha: f64,
    pub teacher_seed: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSection {
    pub loss: Option<TaskLoss>,
    /// Strong-convexity modulus for the ridge loss.
    pub h: f64,
    /// Class count override for hinge on file streams; synthetic streams
    /// carry their own count.
    pub classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSection {
    pub kind: Option<OptimizerKind>,
    pub schedule: ScheduleKind,
    pub eta1: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    /// Geometric β₁ decay for the diminishing baseline; `None` keeps β₁
    /// constant.
    pub beta1_decay_gamma: Option<f64>,
    /// L∞ box diameter; `None` disables projection (the default).
    pub d_inf: Option<f64>,
    /// Alignment angle feeding the ξ constants.
    pub epsilon: f64,
    /// Declared second-moment floor feeding ξ₂.
    pub mu: f64,
    /// Declared G₂∞ bound feeding ξ₂.
    pub g2_inf: f64,
    pub beta111: f64,
    pub beta121: f64,
    pub beta21: f64,
    pub beta22: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    /// Gate probability override for the learner's own mask draws; defaults
    /// to the stream teacher's ρ.
    pub rho: Option<f64>,
    pub init: InitKind,
    pub init_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowsSection {
    pub t: Option<usize>,
    pub offsets: OffsetsConfig,
    pub oracle: OracleKind,
    pub oracle_iters: u64,
    pub oracle_tol: f64,
    pub oracle_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepEntry {
    pub field: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    /// Loss-log decimation interval for the in-memory record; regret always
    /// uses the full log.
    pub decimate: usize,
    /// Worker threads for the sweep grid; 0 uses the default pool size.
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceSection,
    pub stream: StreamSection,
    pub relu: ReluSection,
    pub task: TaskSection,
    pub optimizer: OptimizerSection,
    pub windows: WindowsSection,
    pub sweep: Vec<SweepEntry>,
    pub run: RunSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: SourceSection {
                kind: None,
                path: None,
                order: OrderSelect::Natural,
                order_seed: 1,
                repeat: 1,
            },
            stream: StreamSection {
                dim: 20,
                classes: 1,
                samples: 1000,
                margin: 0.0,
                skew: 0.0,
                noise: 0.0,
                shift_at: None,
            },
            relu: ReluSection {
                hidden: 8,
                input: 16,
                rho: 0.5,
                alpha: 1.5,
                teacher_seed: 7,
                samples: 1024,
            },
            task: TaskSection { loss: None, h: 1.0, classes: None },
            optimizer: OptimizerSection {
                kind: None,
                schedule: ScheduleKind::WindowScaled,
                eta1: None,
                beta1: 0.8,
                beta2: 0.81,
                beta1_decay_gamma: None,
                d_inf: None,
                epsilon: 0.3,
                mu: 0.5,
                g2_inf: 2.0,
                beta111: 0.8,
                beta121: 0.8,
                beta21: 0.81,
                beta22: 0.81,
                gamma1: 0.99,
                gamma2: 0.99,
                rho: None,
                init: InitKind::NearTeacher,
                init_radius: 0.1,
            },
            windows: WindowsSection {
                t: None,
                offsets: OffsetsConfig::Covering,
                oracle: OracleKind::Auto,
                oracle_iters: 2000,
                oracle_tol: 1e-9,
                oracle_seed: 0,
            },
            sweep: Vec::new(),
            run: RunSection { seeds: vec![1], output_dir: None, decimate: 100, workers: 0 },
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse::<T>().map_err(|_| {
        invalid(format!(
            "{key}: cannot parse {raw:?} as {}",
            std::any::type_name::<T>()
        ))
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for piece in raw.split(',') {
        out.push(parse_num::<T>(key, piece.trim())?);
    }
    if out.is_empty() {
        return Err(invalid(format!("{key}: empty list")));
    }
    Ok(out)
}

fn parse_offsets(raw: &str) -> Result<OffsetsConfig> {
    if raw == "covering" {
        return Ok(OffsetsConfig::Covering);
    }
    if let Some(rest) = raw.strip_prefix("strided:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(invalid("offsets: strided form is strided:<start>:<stride>:<count>"));
        }
        return Ok(OffsetsConfig::Strided {
            start: parse_num("offsets start", parts[0])?,
            stride: parse_num("offsets stride", parts[1])?,
            count: parse_num("offsets count", parts[2])?,
        });
    }
    if let Some(rest) = raw.strip_prefix("explicit:") {
        return Ok(OffsetsConfig::Explicit(parse_list("offsets", rest)?));
    }
    Err(invalid(format!(
        "offsets: expected covering, strided:<start>:<stride>:<count>, or \
         explicit:<p1>,<p2>,..., got {raw:?}"
    )))
}

/// Applies one `section.key = raw` setting. Shared by the file parser and
/// the sweep expander, so a swept field accepts exactly the values its
/// config line would.
fn apply_setting(cfg: &mut ExperimentConfig, section: &str, key: &str, raw: &str) -> Result<()> {
    match (section, key) {
        ("source", "kind") => {
            cfg.source.kind = Some(match raw {
                "synthetic_convex" => SourceSelect::SyntheticConvex,
                "synthetic_relu" => SourceSelect::SyntheticRelu,
                "libsvm" => SourceSelect::Libsvm,
                _ => {
                    return Err(invalid(format!(
                        "source.kind: expected synthetic_convex, synthetic_relu, or libsvm, \
                         got {raw:?}"
                    )))
                }
            })
        }
        ("source", "path") => cfg.source.path = Some(PathBuf::from(raw)),
        ("source", "order") => {
            cfg.source.order = match raw {
                "natural" => OrderSelect::Natural,
                "permuted" => OrderSelect::Permuted,
                _ => {
                    return Err(invalid(format!(
                        "source.order: expected natural or permuted, got {raw:?}"
                    )))
                }
            }
        }
        ("source", "order_seed") => cfg.source.order_seed = parse_num(key, raw)?,
        ("source", "repeat") => cfg.source.repeat = parse_num(key, raw)?,
        ("stream", "dim") => cfg.stream.dim = parse_num(key, raw)?,
        ("stream", "classes") => cfg.stream.classes = parse_num(key, raw)?,
        ("stream", "samples") => cfg.stream.samples = parse_num(key, raw)?,
        ("stream", "margin") => cfg.stream.margin = parse_num(key, raw)?,
        ("stream", "skew") => cfg.stream.skew = parse_num(key, raw)?,
        ("stream", "noise") => cfg.stream.noise = parse_num(key, raw)?,
        ("stream", "shift_at") => {
            cfg.stream.shift_at =
                if raw == "none" { None } else { Some(parse_num(key, raw)?) }
        }
        ("relu", "hidden") => cfg.relu.hidden = parse_num(key, raw)?,
        ("relu", "input") => cfg.relu.input = parse_num(key, raw)?,
        ("relu", "rho") => cfg.relu.rho = parse_num(key, raw)?,
        ("relu", "alpha") => cfg.relu.alpha = parse_num(key, raw)?,
        ("relu", "teacher_seed") => cfg.relu.teacher_seed = parse_num(key, raw)?,
        ("relu", "samples") => cfg.relu.samples = parse_num(key, raw)?,
        ("task", "loss") => {
            cfg.task.loss = Some(match raw {
                "squared" => TaskLoss::Squared,
                "ridge" => TaskLoss::Ridge,
                "hinge" => TaskLoss::Hinge,
                "realizable" => TaskLoss::Realizable,
                _ => {
                    return Err(invalid(format!(
                        "task.loss: expected squared, ridge, hinge, or realizable, got {raw:?}"
                    )))
                }
            })
        }
        ("task", "h") => cfg.task.h = parse_num(key, raw)?,
        ("task", "classes") => cfg.task.classes = Some(parse_num(key, raw)?),
        ("optimizer", "kind") => {
            cfg.optimizer.kind = Some(match raw {
                "ogd" => OptimizerKind::Ogd,
                "convg_adam" => OptimizerKind::ConvgAdam,
                "amsgrad_baseline" => OptimizerKind::AmsgradBaseline,
                "dnn_gd" => OptimizerKind::DnnGd,
                "dnn_adam" => OptimizerKind::DnnAdam,
                _ => {
                    return Err(invalid(format!(
                        "optimizer.kind: expected ogd, convg_adam, amsgrad_baseline, dnn_gd, \
                         or dnn_adam, got {raw:?}"
                    )))
                }
            })
        }
        ("optimizer", "schedule") => {
            cfg.optimizer.schedule = match raw {
                "window_scaled" => ScheduleKind::WindowScaled,
                "inverse_sqrt_time" => ScheduleKind::InverseSqrtTime,
                "constant" => ScheduleKind::Constant,
                _ => {
                    return Err(invalid(format!(
                        "optimizer.schedule: expected window_scaled, inverse_sqrt_time, or \
                         constant, got {raw:?}"
                    )))
                }
            }
        }
        ("optimizer", "eta1") => cfg.optimizer.eta1 = Some(parse_num(key, raw)?),
        ("optimizer", "beta1") => cfg.optimizer.beta1 = parse_num(key, raw)?,
        ("optimizer", "beta2") => cfg.optimizer.beta2 = parse_num(key, raw)?,
        ("optimizer", "beta1_decay_gamma") => {
            cfg.optimizer.beta1_decay_gamma = Some(parse_num(key, raw)?)
        }
        ("optimizer", "d_inf") => cfg.optimizer.d_inf = Some(parse_num(key, raw)?),
        ("optimizer", "epsilon") => cfg.optimizer.epsilon = parse_num(key, raw)?,
        ("optimizer", "mu") => cfg.optimizer.mu = parse_num(key, raw)?,
        ("optimizer", "g2_inf") => cfg.optimizer.g2_inf = parse_num(key, raw)?,
        ("optimizer", "beta111") => cfg.optimizer.beta111 = parse_num(key, raw)?,
        ("optimizer", "beta121") => cfg.optimizer.beta121 = parse_num(key, raw)?,
        ("optimizer", "beta21") => cfg.optimizer.beta21 = parse_num(key, raw)?,
        ("optimizer", "beta22") => cfg.optimizer.beta22 = parse_num(key, raw)?,
        ("optimizer", "gamma1") => cfg.optimizer.gamma1 = parse_num(key, raw)?,
        ("optimizer", "gamma2") => cfg.optimizer.gamma2 = parse_num(key, raw)?,
        ("optimizer", "rho") => cfg.optimizer.rho = Some(parse_num(key, raw)?),
        ("optimizer", "init") => {
            cfg.optimizer.init = match raw {
                "near_teacher" => InitKind::NearTeacher,
                "isotropic" => InitKind::Isotropic,
                _ => {
                    return Err(invalid(format!(
                        "optimizer.init: expected near_teacher or isotropic, got {raw:?}"
                    )))
                }
            }
        }
        ("optimizer", "init_radius") => cfg.optimizer.init_radius = parse_num(key, raw)?,
        ("windows", "t") => cfg.windows.t = Some(parse_num(key, raw)?),
        ("windows", "offsets") => cfg.windows.offsets = parse_offsets(raw)?,
        ("windows", "oracle") => {
            cfg.windows.oracle = match raw {
                "auto" => OracleKind::Auto,
                "quadratic" => OracleKind::Quadratic,
                "subgradient" => OracleKind::Subgradient,
                "teacher" => OracleKind::Teacher,
                _ => {
                    return Err(invalid(format!(
                        "windows.oracle: expected auto, quadratic, subgradient, or teacher, \
                         got {raw:?}"
                    )))
                }
            }
        }
        ("windows", "oracle_iters") => cfg.windows.oracle_iters = parse_num(key, raw)?,
        ("windows", "oracle_tol") => cfg.windows.oracle_tol = parse_num(key, raw)?,
        ("windows", "oracle_seed") => cfg.windows.oracle_seed = parse_num(key, raw)?,
        ("run", "seeds") => cfg.run.seeds = parse_list(key, raw)?,
        ("run", "output_dir") => cfg.run.output_dir = Some(PathBuf::from(raw)),
        ("run", "decimate") => cfg.run.decimate = parse_num(key, raw)?,
        ("run", "workers") => cfg.run.workers = parse_num(key, raw)?,
        _ => return Err(invalid(format!("unknown key {section}.{key}"))),
    }
    Ok(())
}

/// Fields the sweep may not touch: non-scalar or run-bookkeeping settings.
fn sweepable(path: &str) -> bool {
    !matches!(path, "source.path" | "windows.offsets") && !path.starts_with("run.")
}

/// Sets one field by `section.key` path; the sweep expander's entry point.
pub fn set_field(cfg: &mut ExperimentConfig, path: &str, raw: &str) -> Result<()> {
    let (section, key) = path
        .split_once('.')
        .ok_or_else(|| invalid(format!("swept field {path:?} is not of the form section.key")))?;
    if !sweepable(path) {
        return Err(invalid(format!("field {path} cannot be swept")));
    }
    apply_setting(cfg, section, key, raw)
}

const SECTIONS: [&str; 8] =
    ["source", "stream", "relu", "task", "optimizer", "windows", "sweep", "run"];

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section: Option<String> = None;
    let mut seen: std::collections::HashSet<(String, String)> = std::collections::HashSet::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let at = |msg: String| Error::Config { line: line_no, msg };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| at(format!("unterminated section header {trimmed:?}")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(at(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| at(format!("expected key = value, got {trimmed:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let section = section
            .as_deref()
            .ok_or_else(|| at(format!("key {key:?} appears before any [section]")))?;
        if !seen.insert((section.to_string(), key.to_string())) {
            return Err(at(format!("duplicate key {key:?} in [{section}]")));
        }
        if section == "sweep" {
            let values: Vec<String> =
                value.split(',').map(|v| v.trim().to_string()).collect();
            if values.iter().any(String::is_empty) {
                return Err(at(format!("sweep {key}: empty value in list")));
            }
            cfg.sweep.push(SweepEntry { field: key.to_string(), values });
        } else {
            apply_setting(&mut cfg, section, key, value)
                .map_err(|e| at(e.to_string()))?;
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

pub fn parse_config_file(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Base-config checks: required keys, source/task/optimizer compatibility,
/// and dry applications of every sweep value. Cross-field validity of a
/// particular sweep point is still checked when that point runs, so one bad
/// grid point fails alone.
fn validate(cfg: &ExperimentConfig) -> Result<()> {
    let source = cfg
        .source
        .kind
        .ok_or_else(|| invalid("source.kind is required"))?;
    let loss = cfg.task.loss.ok_or_else(|| invalid("task.loss is required"))?;
    let optimizer = cfg
        .optimizer
        .kind
        .ok_or_else(|| invalid("optimizer.kind is required"))?;
    if cfg.optimizer.eta1.is_none() {
        return Err(invalid("optimizer.eta1 is required"));
    }
    if cfg.windows.t.is_none() {
        return Err(invalid("windows.t is required"));
    }
    if source == SourceSelect::Libsvm && cfg.source.path.is_none() {
        return Err(invalid("source.path is required for libsvm sources"));
    }
    if cfg.run.decimate == 0 {
        return Err(invalid("run.decimate must be >= 1"));
    }

    let relu_source = source == SourceSelect::SyntheticRelu;
    let relu_loss = loss == TaskLoss::Realizable;
    if relu_source != relu_loss {
        return Err(invalid(
            "task.loss = realizable goes with source.kind = synthetic_relu and only with it",
        ));
    }
    if optimizer.is_relu() != relu_loss {
        return Err(invalid(
            "dnn_gd/dnn_adam pair with the realizable task; ogd/convg_adam/amsgrad_baseline \
             with the convex losses",
        ));
    }
    if optimizer == OptimizerKind::AmsgradBaseline
        && cfg.optimizer.schedule != ScheduleKind::InverseSqrtTime
    {
        return Err(invalid(
            "amsgrad_baseline steps at eta1/sqrt(t); set optimizer.schedule = inverse_sqrt_time",
        ));
    }

    for entry in &cfg.sweep {
        let mut probe = cfg.clone();
        for value in &entry.values {
            set_field(&mut probe, &entry.field, value)
                .map_err(|e| invalid(format!("sweep {}: {e}", entry.field)))?;
        }
    }
    Ok(())
}

impl ExperimentConfig {
    /// The materializable stream description for this (resolved) config.
    pub fn stream_source(&self) -> Result<StreamSource> {
        let kind = match self.source.kind.ok_or_else(|| invalid("source.kind is required"))? {
            SourceSelect::Libsvm => SourceKind::LibsvmFile(
                self.source
                    .path
                    .clone()
                    .ok_or_else(|| invalid("source.path is required for libsvm sources"))?,
            ),
            SourceSelect::SyntheticConvex => SourceKind::SyntheticConvex(ConvexStreamConfig {
                dim: self.stream.dim,
                k: self.stream.classes,
                n_samples: self.stream.samples,
                margin: self.stream.margin,
                feature_frequency_skew: self.stream.skew,
                noise_rate: self.stream.noise,
                shift_at: self.stream.shift_at,
            }),
            SourceSelect::SyntheticRelu => SourceKind::SyntheticRelu(ReluStreamConfig {
                n: self.relu.hidden,
                d: self.relu.input,
                rho: self.relu.rho,
                alpha: self.relu.alpha,
                teacher_seed: self.relu.teacher_seed,
                n_samples: self.relu.samples,
                informative_filter: None,
                max_rejections: 10_000,
            }),
        };
        let order = match self.source.order {
            OrderSelect::Natural => Order::Natural,
            // Stream 3 of the order seed; data, mask, and init draws use
            // streams 0-2 of the run seed.
            OrderSelect::Permuted => Order::Permuted(RngSeed::new(self.source.order_seed, 3)),
        };
        Ok(StreamSource { kind, order, repeat: self.source.repeat })
    }

    /// Compact one-line source description for run rows.
    pub fn source_desc(&self) -> String {
        match self.source.kind {
            Some(SourceSelect::Libsvm) => format!(
                "libsvm:{}",
                self.source.path.as_deref().unwrap_or(Path::new("?")).display()
            ),
            Some(SourceSelect::SyntheticConvex) => {
                let s = &self.stream;
                let shift = match s.shift_at {
                    Some(at) => format!(" shift@{at}"),
                    None => String::new(),
                };
                format!(
                    "convex(dim={} k={} n={} skew={} noise={}{})",
                    s.dim, s.classes, s.samples, s.skew, s.noise, shift
                )
            }
            Some(SourceSelect::SyntheticRelu) => {
                let r = &self.relu;
                format!(
                    "relu(n={} d={} rho={} alpha={} teacher={} n_samples={})",
                    r.hidden, r.input, r.rho, r.alpha, r.teacher_seed, r.samples
                )
            }
            None => "unset".into(),
        }
    }

    /// Canonical text of every field that shapes a run's computation, in
    /// fixed order. Excludes `[sweep]` (grid bookkeeping; points are hashed
    /// after resolution) and `[run]` (execution plumbing). The run hash is
    /// the digest of this string plus the seed.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let kind = match self.source.kind {
            Some(SourceSelect::SyntheticConvex) => "synthetic_convex",
            Some(SourceSelect::SyntheticRelu) => "synthetic_relu",
            Some(SourceSelect::Libsvm) => "libsvm",
            None => "unset",
        };
        s.push_str(&format!("source.kind={kind}\n"));
        s.push_str(&format!(
            "source.path={}\n",
            self.source.path.as_deref().unwrap_or(Path::new("none")).display()
        ));
        let order = match self.source.order {
            OrderSelect::Natural => "natural",
            OrderSelect::Permuted => "permuted",
        };
        s.push_str(&format!("source.order={order}\n"));
        s.push_str(&format!("source.order_seed={}\n", self.source.order_seed));
        s.push_str(&format!("source.repeat={}\n", self.source.repeat));
        let st = &self.stream;
        s.push_str(&format!(
            "stream={} {} {} {} {} {} {:?}\n",
            st.dim, st.classes, st.samples, st.margin, st.skew, st.noise, st.shift_at
        ));
        let r = &self.relu;
        s.push_str(&format!(
            "relu={} {} {} {} {} {}\n",
            r.hidden, r.input, r.rho, r.alpha, r.teacher_seed, r.samples
        ));
        let loss = match self.task.loss {
            Some(TaskLoss::Squared) => "squared",
            Some(TaskLoss::Ridge) => "ridge",
            Some(TaskLoss::Hinge) => "hinge",
            Some(TaskLoss::Realizable) => "realizable",
            None => "unset",
        };
        s.push_str(&format!("task={loss} {} {:?}\n", self.task.h, self.task.classes));
        let o = &self.optimizer;
        s.push_str(&format!(
            "optimizer={} {} {:?} {} {} {:?} {:?} {} {} {} {} {} {} {} {} {} {:?} {:?} {}\n",
            o.kind.map_or("unset", OptimizerKind::name),
            o.schedule.name(),
            o.eta1,
            o.beta1,
            o.beta2,
            o.beta1_decay_gamma,
            o.d_inf,
            o.epsilon,
            o.mu,
            o.g2_inf,
            o.beta111,
            o.beta121,
            o.beta21,
            o.beta22,
            o.gamma1,
            o.gamma2,
            o.rho,
            o.init == InitKind::NearTeacher,
            o.init_radius
        ));
        let w = &self.windows;
        s.push_str(&format!(
            "windows={:?} {:?} {:?} {} {} {}\n",
            w.t, w.offsets, w.oracle, w.oracle_iters, w.oracle_tol, w.oracle_seed
        ));
        s
    }
}

/// One resolved grid point: the base config with this point's sweep values
/// applied, plus the `field=value` assignment label (empty for no sweep).
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub config: ExperimentConfig,
    pub label: String,
}

/// Expands the sweep grid in file order (first swept field varies slowest).
/// A config without `[sweep]` yields exactly one point with an empty label.
pub fn expand_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let mut points = vec![SweepPoint { config: cfg.clone(), label: String::new() }];
    for entry in &cfg.sweep {
        let mut next = Vec::with_capacity(points.len() * entry.values.len());
        for point in &points {
            for value in &entry.values {
                let mut config = point.config.clone();
                set_field(&mut config, &entry.field, value)?;
                let label = if point.label.is_empty() {
                    format!("{}={}", entry.field, value)
                } else {
                    format!("{};{}={}", point.label, entry.field, value)
                };
                next.push(SweepPoint { config, label });
            }
        }
        points = next;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_convex() -> String {
        "[source]\nkind = synthetic_convex\n\
         [task]\nloss = ridge\n\
         [optimizer]\nkind = ogd\neta1 = 0.5\n\
         [windows]\nt = 16\n"
            .to_string()
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config_str(&minimal_convex()).unwrap();
        assert_eq!(cfg.source.kind, Some(SourceSelect::SyntheticConvex));
        assert_eq!(cfg.stream.dim, 20, "default stream dim");
        assert_eq!(cfg.optimizer.schedule, ScheduleKind::WindowScaled, "default schedule");
        assert_eq!(cfg.run.seeds, vec![1], "default seed list");
        assert_eq!(cfg.run.decimate, 100, "default decimation");
        assert!(cfg.sweep.is_empty());
    }

    #[test]
    fn full_config_round_trips_every_section() {
        let text = "\
# experiment
[source]
kind = synthetic_convex
order = permuted
order_seed = 9
repeat = 2

[stream]
dim = 6
classes = 3
samples = 500
margin = 0.1
skew = 1.5
noise = 0.05
shift_at = 250

[task]
loss = hinge

[optimizer]
kind = convg_adam
schedule = window_scaled
eta1 = 0.25
beta1 = 0.8
beta2 = 0.81
d_inf = 4.0

[windows]
t = 32
offsets = strided:0:8:4
oracle = subgradient
oracle_iters = 500
oracle_tol = 1e-6

[sweep]
optimizer.eta1 = 0.5, 0.25, 0.125
windows.t = 32, 64

[run]
seeds = 1, 2, 3
output_dir = out
decimate = 10
workers = 2
";
        let cfg = parse_config_str(text).unwrap();
        assert_eq!(cfg.stream.shift_at, Some(250));
        assert_eq!(
            cfg.windows.offsets,
            OffsetsConfig::Strided { start: 0, stride: 8, count: 4 }
        );
        assert_eq!(cfg.sweep.len(), 2);
        assert_eq!(cfg.run.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.run.workers, 2);

        let points = expand_sweep(&cfg).unwrap();
        assert_eq!(points.len(), 6, "3 rates x 2 window lengths");
        assert_eq!(points[0].label, "optimizer.eta1=0.5;windows.t=32");
        assert_eq!(points[5].label, "optimizer.eta1=0.125;windows.t=64");
        assert_eq!(points[5].config.optimizer.eta1, Some(0.125));
        assert_eq!(points[5].config.windows.t, Some(64));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "[source]\nkind = synthetic_convex\nbogus = 1\n";
        let err = parse_config_str(text).unwrap_err();
        assert!(
            matches!(err, Error::Config { line: 3, .. }),
            "expected line 3, got {err}"
        );
    }

    #[test]
    fn unknown_sections_and_duplicate_keys_are_rejected() {
        assert!(matches!(
            parse_config_str("[nope]\n").unwrap_err(),
            Error::Config { line: 1, .. }
        ));
        let dup = "[source]\nkind = libsvm\nkind = libsvm\n";
        assert!(matches!(
            parse_config_str(dup).unwrap_err(),
            Error::Config { line: 3, .. }
        ));
    }

    #[test]
    fn cross_field_rules_hold() {
        // libsvm needs a path.
        let text = minimal_convex().replace("synthetic_convex", "libsvm");
        assert!(parse_config_str(&text).is_err());
        // Realizable task requires the relu source and a dnn optimizer.
        let text = minimal_convex().replace("loss = ridge", "loss = realizable");
        assert!(parse_config_str(&text).is_err());
        // The diminishing baseline refuses a constant-rate schedule.
        let text = minimal_convex().replace("kind = ogd", "kind = amsgrad_baseline");
        assert!(parse_config_str(&text).is_err());
        let text = minimal_convex().replace(
            "kind = ogd\n",
            "kind = amsgrad_baseline\nschedule = inverse_sqrt_time\n",
        );
        assert!(parse_config_str(&text).is_ok());
    }

    #[test]
    fn sweep_rejects_unknown_and_unsweepable_fields() {
        let text = format!("{}[sweep]\noptimizer.nope = 1\n", minimal_convex());
        assert!(parse_config_str(&text).is_err(), "unknown swept key");
        let text = format!("{}[sweep]\nrun.decimate = 1, 2\n", minimal_convex());
        assert!(parse_config_str(&text).is_err(), "run fields are not sweepable");
        let text = format!("{}[sweep]\nwindows.offsets = covering\n", minimal_convex());
        assert!(parse_config_str(&text).is_err(), "structured fields are not sweepable");
        let text = format!("{}[sweep]\noptimizer.eta1 = 0.5, oops\n", minimal_convex());
        assert!(parse_config_str(&text).is_err(), "non-numeric sweep value");
    }

    #[test]
    fn canonical_string_tracks_resolved_fields_only() {
        let base = parse_config_str(&minimal_convex()).unwrap();
        let mut swept = base.clone();
        swept.sweep.push(SweepEntry { field: "optimizer.eta1".into(), values: vec!["0.5".into()] });
        assert_eq!(
            base.canonical_string(),
            swept.canonical_string(),
            "sweep bookkeeping must not move the run identity"
        );
        let mut other = base.clone();
        set_field(&mut other, "optimizer.eta1", "0.25").unwrap();
        assert_ne!(base.canonical_string(), other.canonical_string());
    }

    #[test]
    fn offsets_forms_parse() {
        assert_eq!(parse_offsets("covering").unwrap(), OffsetsConfig::Covering);
        assert_eq!(
            parse_offsets("explicit:0,4,8").unwrap(),
            OffsetsConfig::Explicit(vec![0, 4, 8])
        );
        assert!(parse_offsets("strided:1:2").is_err());
        assert!(parse_offsets("ring").is_err());
    }
}
