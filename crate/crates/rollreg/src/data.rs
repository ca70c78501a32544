//! Streaming data sources: a libsvm-format reader/writer, synthetic convex
//! classification/regression streams, realizable gated-network teacher
//! streams, and deterministic order permutation.
//!
//! Every generator is a pure function of its config and seed: replaying the
//! same pair yields an identical sample sequence, which is what makes runs
//! and their CSV outputs reproducible end to end.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::core::{FeatureVector, Label, LabeledExample, RngSeed};
use crate::relu_net::{informative_sample_cosine, ReluNetParams, TeacherParams};
use crate::{Error, Result};

/// Attempt budget per emitted sample when margin rejection is on.
const MARGIN_REJECTION_CAP: u64 = 10_000;

/// Synthetic convex stream shape.
///
/// `k = 1` produces a regression stream: targets are `w̄ᵀx` plus additive
/// Gaussian noise with standard deviation `noise_rate`, and `margin` is
/// ignored. `k ≥ 2` produces a multiclass stream: the label is the argmax
/// class score of a hidden weight matrix, flipped to a uniformly random
/// other class with probability `noise_rate`, and samples are redrawn until
/// the top-two score gap reaches `margin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexStreamConfig {
    pub dim: usize,
    pub k: usize,
    pub n_samples: usize,
    pub margin: f64,
    /// Coordinate j is active with probability `min(1, 0.8·(j+1)^(−skew))`.
    pub feature_frequency_skew: f64,
    pub noise_rate: f64,
    /// Sample index at which the hidden weights are re-drawn (distribution
    /// shift); `None` for a stationary stream.
    pub shift_at: Option<usize>,
}

impl ConvexStreamConfig {
    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParam("stream dim must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParam("stream needs k >= 1".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "margin must be finite and >= 0, got {}",
                self.margin
            )));
        }
        if !(self.feature_frequency_skew >= 0.0 && self.feature_frequency_skew.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "feature frequency skew must be finite and >= 0, got {}",
                self.feature_frequency_skew
            )));
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "noise rate must be finite and >= 0, got {}",
                self.noise_rate
            )));
        }
        if self.k >= 2 && self.noise_rate > 1.0 {
            return Err(Error::InvalidParam(format!(
                "label-flip probability must be <= 1, got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }
}

/// Realizable gated-network stream shape. Inputs have standard normal
/// entries; labels are `ρ·w1*ᵀw2*·z` from a teacher drawn once from
/// `teacher_seed` (w1* unit norm, w2* of Frobenius norm `alpha`).
///
/// `informative_filter`, when set to an angle ε, asks for samples whose
/// alignment with the current weight error is at least cos ε. That couples
/// the source to the learner's iterate, so it is only available through the
/// pull-style [`ReluStreamSampler::next_informative`]; the batch generator
/// rejects configs that set it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluStreamConfig {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub alpha: f64,
    pub teacher_seed: u64,
    pub n_samples: usize,
    /// Alignment angle ε for informative rejection sampling, or `None` for
    /// the unconditioned stream (the default).
    pub informative_filter: Option<f64>,
    pub max_rejections: u64,
}

impl ReluStreamConfig {
    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::InvalidParam("network dims must be >= 1".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "rho must lie in (0, 1], got {}",
                self.rho
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if let Some(eps) = self.informative_filter {
            if !(0.0..std::f64::consts::FRAC_PI_2).contains(&eps) {
                return Err(Error::InvalidParam(format!(
                    "informative filter angle must lie in [0, pi/2), got {eps}"
                )));
            }
            if self.max_rejections == 0 {
                return Err(Error::InvalidParam(
                    "informative filter needs max_rejections >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Reads a libsvm-format file: one `<label> <idx>:<val> ...` line per
/// sample, 1-based indices mapped to 0-based, labels parsed as class ids
/// when integral and nonnegative (real targets otherwise). Content from the
/// first `#` on a line is a comment; blank lines are skipped; zero-valued
/// entries are dropped (the sparse representation never stores them). The
/// feature dimension is the largest index seen anywhere in the file.
pub fn read_libsvm(path: &Path) -> Result<Vec<LabeledExample>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut raw: Vec<(Label, Vec<(usize, f64)>)> = Vec::new();
    let mut max_dim = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else { continue };
        // A label written as an unsigned integer is a class id; anything
        // else (sign, decimal point, exponent) is a real target. Deciding
        // lexically keeps write→read an exact identity for both kinds.
        let label = match label_tok.parse::<usize>() {
            Ok(c) => Label::ClassId(c),
            Err(_) => Label::RealTarget(label_tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad label `{label_tok}`"),
            })?),
        };
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut last_idx = 0usize;
        for tok in tokens {
            let (i_str, v_str) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected idx:val, got `{tok}`"),
            })?;
            let file_idx: usize = i_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature index `{i_str}`"),
            })?;
            if file_idx == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "feature indices are 1-based; got 0".into(),
                });
            }
            if file_idx <= last_idx {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("feature indices must increase; {file_idx} after {last_idx}"),
                });
            }
            last_idx = file_idx;
            let val: f64 = v_str.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad feature value `{v_str}`"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite feature value `{v_str}`"),
                });
            }
            if val != 0.0 {
                entries.push((file_idx - 1, val));
            }
            max_dim = max_dim.max(file_idx);
        }
        raw.push((label, entries));
    }
    raw.into_iter()
        .map(|(label, entries)| {
            Ok(LabeledExample::new(FeatureVector::new(max_dim, entries)?, label))
        })
        .collect()
}

/// Writes a stream in the libsvm format [`read_libsvm`] reads (indices
/// shifted back to 1-based). Reading the result back reproduces the stream
/// exactly: floats print in shortest round-trip form.
pub fn write_libsvm(stream: &[LabeledExample], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for ex in stream {
        match ex.label {
            Label::ClassId(c) => write!(out, "{c}")?,
            Label::RealTarget(y) => {
                // An integral nonnegative float would read back as a class
                // id; force a decimal point to keep the label kind.
                if y.is_finite() && y.fract() == 0.0 && y >= 0.0 {
                    write!(out, "{y:.1}")?
                } else {
                    write!(out, "{y}")?
                }
            }
        }
        for &(i, v) in ex.features.entries() {
            write!(out, " {}:{}", i + 1, v)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn draw_features<R: Rng>(cfg: &ConvexStreamConfig, rng: &mut R) -> Vec<(usize, f64)> {
    let mut entries = Vec::new();
    for j in 0..cfg.dim {
        let p = (0.8 * ((j + 1) as f64).powf(-cfg.feature_frequency_skew)).min(1.0);
        if rng.gen_bool(p) {
            let v: f64 = rng.sample(StandardNormal);
            if v != 0.0 {
                entries.push((j, v));
            }
        }
    }
    entries
}

fn class_scores(w: &[f64], k: usize, dim: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut scores = vec![0.0f64; k];
    for (c, s) in scores.iter_mut().enumerate() {
        for &(j, v) in entries {
            *s += w[c * dim + j] * v;
        }
    }
    scores
}

/// Top score, its class (smallest index on ties), and the gap to the
/// runner-up.
fn top_two(scores: &[f64]) -> (usize, f64) {
    let mut best = 0usize;
    for (c, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = c;
        }
    }
    let mut runner = f64::NEG_INFINITY;
    for (c, &s) in scores.iter().enumerate() {
        if c != best {
            runner = runner.max(s);
        }
    }
    (best, scores[best] - runner)
}

/// Synthetic convex stream plus the hidden generating weights per era
/// (one flat k×dim matrix, or two when `shift_at` re-draws them).
pub fn gen_convex_stream_detailed(
    cfg: &ConvexStreamConfig,
    seed: RngSeed,
) -> Result<(Vec<Vec<f64>>, Vec<LabeledExample>)> {
    cfg.validate()?;
    let mut rng = seed.rng();
    let draw_w = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<f64> {
        (0..cfg.k * cfg.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
    };
    let mut w = draw_w(&mut rng);
    let mut eras = vec![w.clone()];
    let mut stream = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        if cfg.shift_at == Some(i) {
            w = draw_w(&mut rng);
            eras.push(w.clone());
        }
        let mut attempts = 0u64;
        let (entries, label) = loop {
            attempts += 1;
            if attempts > MARGIN_REJECTION_CAP {
                return Err(Error::RejectionCap {
                    attempts: attempts - 1,
                    hint: "margin too wide for this config; reduce it".into(),
                });
            }
            let entries = draw_features(cfg, &mut rng);
            if entries.is_empty() {
                continue;
            }
            if cfg.k == 1 {
                let mut y: f64 = entries.iter().map(|&(j, v)| w[j] * v).sum();
                if cfg.noise_rate > 0.0 {
                    y += cfg.noise_rate * rng.sample::<f64, _>(StandardNormal);
                }
                break (entries, Label::RealTarget(y));
            }
            let scores = class_scores(&w, cfg.k, cfg.dim, &entries);
            let (best, gap) = top_two(&scores);
            if gap < cfg.margin {
                continue;
            }
            let label = if cfg.noise_rate > 0.0 && rng.gen::<f64>() < cfg.noise_rate {
                let r = rng.gen_range(0..cfg.k - 1);
                if r >= best {
                    r + 1
                } else {
                    r
                }
            } else {
                best
            };
            break (entries, Label::ClassId(label));
        };
        stream.push(LabeledExample::new(FeatureVector::new(cfg.dim, entries)?, label));
    }
    Ok((eras, stream))
}

/// Synthetic convex stream (see [`ConvexStreamConfig`] for the generating
/// process). Deterministic in `(cfg, seed)`.
pub fn gen_convex_stream(cfg: &ConvexStreamConfig, seed: RngSeed) -> Result<Vec<LabeledExample>> {
    gen_convex_stream_detailed(cfg, seed).map(|(_, stream)| stream)
}

fn draw_teacher(cfg: &ReluStreamConfig) -> Result<TeacherParams> {
    let mut rng = RngSeed::new(cfg.teacher_seed, 0).rng();
    let mut w1 = Array1::zeros(cfg.n);
    for _ in 0..16 {
        w1 = Array1::from_iter((0..cfg.n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        if w1.dot(&w1) > 0.0 {
            break;
        }
    }
    let n1 = w1.dot(&w1).sqrt();
    if n1 == 0.0 {
        return Err(Error::DegenerateRescale);
    }
    let w1 = &w1 / n1;
    let w2 = Array2::from_shape_fn((cfg.n, cfg.d), |_| rng.sample::<f64, _>(StandardNormal));
    let fro = w2.iter().map(|v| v * v).sum::<f64>().sqrt();
    if fro == 0.0 {
        return Err(Error::DegenerateRescale);
    }
    let w2 = &w2 * (cfg.alpha / fro);
    TeacherParams::new(w1, w2, cfg.rho)
}

/// Pull-style realizable sampler. Each draw returns `(z, y)` with
/// `y = ρ·w1*ᵀw2*·z` exactly; [`Self::next_informative`] additionally
/// rejection-samples `z` against the caller's current iterate so accepted
/// samples satisfy the declared alignment ε.
#[derive(Debug, Clone)]
pub struct ReluStreamSampler {
    teacher: TeacherParams,
    rng: rand_chacha::ChaCha12Rng,
    eps_cos: Option<f64>,
    max_rejections: u64,
    d: usize,
    /// Largest |z| entry emitted so far (boundedness bookkeeping).
    z_linf_max: f64,
}

impl ReluStreamSampler {
    pub fn new(cfg: &ReluStreamConfig, seed: RngSeed) -> Result<Self> {
        cfg.validate()?;
        let teacher = draw_teacher(cfg)?;
        Ok(Self {
            teacher,
            rng: seed.rng(),
            eps_cos: cfg.informative_filter.map(f64::cos),
            max_rejections: cfg.max_rejections,
            d: cfg.d,
            z_linf_max: 0.0,
        })
    }

    pub fn teacher(&self) -> &TeacherParams {
        &self.teacher
    }

    /// Largest |z| coordinate seen across every draw so far.
    pub fn z_linf_max(&self) -> f64 {
        self.z_linf_max
    }

    fn draw_z(&mut self) -> Array1<f64> {
        let z =
            Array1::from_iter((0..self.d).map(|_| self.rng.sample::<f64, _>(StandardNormal)));
        let linf = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.z_linf_max = self.z_linf_max.max(linf);
        z
    }

    /// Next unconditioned sample.
    pub fn next_unconditioned(&mut self) -> Result<(Array1<f64>, f64)> {
        let z = self.draw_z();
        let y = self.teacher.label_for(&z)?;
        Ok((z, y))
    }

    /// Next sample aligned with the caller's current weight error: redraws
    /// until `informative_sample_cosine(p, teacher, z) ≥ cos ε`, failing
    /// after `max_rejections` attempts. Requires the filter be configured.
    pub fn next_informative(&mut self, p: &ReluNetParams) -> Result<(Array1<f64>, f64)> {
        let Some(threshold) = self.eps_cos else {
            return Err(Error::InvalidParam(
                "no informative filter configured for this sampler".into(),
            ));
        };
        for _ in 0..self.max_rejections {
            let z = self.draw_z();
            if informative_sample_cosine(p, &self.teacher, &z)? >= threshold {
                let y = self.teacher.label_for(&z)?;
                return Ok((z, y));
            }
        }
        Err(Error::RejectionCap {
            attempts: self.max_rejections,
            hint: "widen the informative angle or raise max_rejections".into(),
        })
    }
}

/// Materializes a full unconditioned teacher stream as labeled examples
/// (dense features, real targets). Configs that set `informative_filter`
/// are rejected here: that filter needs the learner's live iterate, which
/// only [`ReluStreamSampler::next_informative`] receives.
pub fn gen_relu_stream(
    cfg: &ReluStreamConfig,
    seed: RngSeed,
) -> Result<(TeacherParams, Vec<LabeledExample>)> {
    if cfg.informative_filter.is_some() {
        return Err(Error::InvalidParam(
            "informative_filter requires the pull-style sampler driven alongside training"
                .into(),
        ));
    }
    let mut sampler = ReluStreamSampler::new(cfg, seed)?;
    let mut stream = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let (z, y) = sampler.next_unconditioned()?;
        let features = FeatureVector::from_dense(z.as_slice().expect("contiguous"))?;
        stream.push(LabeledExample::new(features, Label::RealTarget(y)));
    }
    Ok((sampler.teacher().clone(), stream))
}

/// Uniform random permutation of a materialized stream, deterministic per
/// seed.
pub fn permute_order(stream: &[LabeledExample], seed: RngSeed) -> Vec<LabeledExample> {
    let mut out = stream.to_vec();
    out.shuffle(&mut seed.rng());
    out
}

/// Largest |feature| entry across a stream (the empirical ‖z‖∞ bound used
/// for step-size and norm-target bookkeeping).
pub fn max_linf_norm(stream: &[LabeledExample]) -> f64 {
    stream.iter().fold(0.0f64, |m, ex| m.max(ex.features.linf_norm()))
}

/// Where a stream comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    LibsvmFile(PathBuf),
    SyntheticConvex(ConvexStreamConfig),
    SyntheticRelu(ReluStreamConfig),
}

/// Presentation order of a materialized stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Natural,
    Permuted(RngSeed),
}

/// A stream source plus presentation order and cycle count. Materializing
/// the same source twice yields identical sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSource {
    pub kind: SourceKind,
    pub order: Order,
    /// Number of passes over the (ordered) base stream, ≥ 1.
    pub repeat: usize,
}

impl StreamSource {
    /// Reads or generates the base stream, applies the order, then
    /// concatenates `repeat` passes of it. Returns the teacher for
    /// realizable sources (`None` otherwise).
    pub fn materialize(&self, seed: RngSeed) -> Result<(Option<TeacherParams>, Vec<LabeledExample>)> {
        if self.repeat == 0 {
            return Err(Error::InvalidParam("repeat must be >= 1".into()));
        }
        let (teacher, base) = match &self.kind {
            SourceKind::LibsvmFile(path) => (None, read_libsvm(path)?),
            SourceKind::SyntheticConvex(cfg) => (None, gen_convex_stream(cfg, seed)?),
            SourceKind::SyntheticRelu(cfg) => {
                let (t, s) = gen_relu_stream(cfg, seed)?;
                (Some(t), s)
            }
        };
        let ordered = match self.order {
            Order::Natural => base,
            Order::Permuted(perm_seed) => permute_order(&base, perm_seed),
        };
        let mut out = Vec::with_capacity(ordered.len() * self.repeat);
        for _ in 0..self.repeat {
            out.extend(ordered.iter().cloned());
        }
        Ok((teacher, out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relu_net::expected_loss;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn libsvm_parses_the_reference_line() {
        let f = write_temp("2 1:0.5 4:-1\n");
        let stream = read_libsvm(f.path()).unwrap();
        assert_eq!(stream.len(), 1);
        assert_eq!(stream[0].label, Label::ClassId(2));
        assert_eq!(stream[0].features.dim(), 4);
        assert_eq!(stream[0].features.entries(), &[(0, 0.5), (3, -1.0)]);
    }

    #[test]
    fn libsvm_handles_comments_blanks_and_real_labels() {
        let f = write_temp("# header comment\n\n-1.5 2:3.25   # trailing note\n3 1:1\n3.0 1:1\n");
        let stream = read_libsvm(f.path()).unwrap();
        assert_eq!(stream.len(), 3);
        assert_eq!(stream[0].label, Label::RealTarget(-1.5), "negative non-integer");
        assert_eq!(stream[0].features.entries(), &[(1, 3.25)]);
        assert_eq!(stream[1].label, Label::ClassId(3), "bare integer is a class id");
        assert_eq!(stream[2].label, Label::RealTarget(3.0), "decimal point keeps it real");
    }

    #[test]
    fn libsvm_empty_file_gives_empty_stream() {
        let f = write_temp("");
        assert!(read_libsvm(f.path()).unwrap().is_empty());
    }

    #[test]
    fn libsvm_errors_carry_line_numbers() {
        let f = write_temp("1 1:0.5\n2 3:1 2:1\n");
        match read_libsvm(f.path()) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("increase"), "unexpected message: {msg}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
        let f = write_temp("abc 1:0.5\n");
        assert!(matches!(read_libsvm(f.path()), Err(Error::Parse { line: 1, .. })));
        let f = write_temp("1 0:0.5\n");
        assert!(matches!(read_libsvm(f.path()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn libsvm_round_trip_is_identity() {
        let cfg = ConvexStreamConfig {
            dim: 12,
            k: 3,
            n_samples: 60,
            margin: 0.0,
            feature_frequency_skew: 0.7,
            noise_rate: 0.1,
            shift_at: None,
        };
        let stream = gen_convex_stream(&cfg, RngSeed::new(11, 0)).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_libsvm(&stream, f.path()).unwrap();
        let back = read_libsvm(f.path()).unwrap();
        assert_eq!(back.len(), stream.len());
        for (a, b) in stream.iter().zip(&back) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.features.entries(), b.features.entries());
        }
    }

    #[test]
    fn libsvm_round_trip_keeps_real_target_kind() {
        // An integral real target must not come back as a class id.
        let ex = LabeledExample::new(
            FeatureVector::new(2, vec![(0, 1.0)]).unwrap(),
            Label::RealTarget(3.0),
        );
        let f = tempfile::NamedTempFile::new().unwrap();
        write_libsvm(&[ex], f.path()).unwrap();
        let back = read_libsvm(f.path()).unwrap();
        assert_eq!(back[0].label, Label::RealTarget(3.0));
    }

    #[test]
    fn convex_stream_is_deterministic_and_sized() {
        let cfg = ConvexStreamConfig {
            dim: 8,
            k: 4,
            n_samples: 40,
            margin: 0.2,
            feature_frequency_skew: 1.0,
            noise_rate: 0.05,
            shift_at: Some(20),
        };
        let a = gen_convex_stream(&cfg, RngSeed::new(7, 3)).unwrap();
        let b = gen_convex_stream(&cfg, RngSeed::new(7, 3)).unwrap();
        assert_eq!(a, b, "same config and seed must replay identically");
        assert_eq!(a.len(), 40);
        let c = gen_convex_stream(&cfg, RngSeed::new(8, 3)).unwrap();
        assert_ne!(a, c, "different seed should change the stream");
    }

    #[test]
    fn noiseless_hinge_stream_respects_margin_and_labels() {
        let cfg = ConvexStreamConfig {
            dim: 6,
            k: 3,
            n_samples: 200,
            margin: 0.3,
            feature_frequency_skew: 0.5,
            noise_rate: 0.0,
            shift_at: None,
        };
        let (eras, stream) = gen_convex_stream_detailed(&cfg, RngSeed::new(2, 0)).unwrap();
        assert_eq!(eras.len(), 1);
        let w = &eras[0];
        for ex in &stream {
            let scores = class_scores(w, cfg.k, cfg.dim, ex.features.entries());
            let (best, gap) = top_two(&scores);
            assert_eq!(ex.label, Label::ClassId(best), "noiseless labels match argmax");
            assert!(gap >= cfg.margin, "gap {gap} below margin");
        }
    }

    #[test]
    fn regression_stream_is_exact_without_noise() {
        let cfg = ConvexStreamConfig {
            dim: 5,
            k: 1,
            n_samples: 50,
            margin: 0.0,
            feature_frequency_skew: 0.0,
            noise_rate: 0.0,
            shift_at: None,
        };
        let (eras, stream) = gen_convex_stream_detailed(&cfg, RngSeed::new(4, 0)).unwrap();
        for ex in &stream {
            let want: f64 = ex.features.entries().iter().map(|&(j, v)| eras[0][j] * v).sum();
            match ex.label {
                Label::RealTarget(y) => assert_eq!(y, want, "no noise term drawn"),
                _ => panic!("regression stream must carry real targets"),
            }
        }
    }

    #[test]
    fn unreachable_margin_reports_the_rejection_cap() {
        let cfg = ConvexStreamConfig {
            dim: 3,
            k: 2,
            n_samples: 1,
            margin: 1e9,
            feature_frequency_skew: 0.0,
            noise_rate: 0.0,
            shift_at: None,
        };
        match gen_convex_stream(&cfg, RngSeed::new(1, 0)) {
            Err(Error::RejectionCap { attempts, hint }) => {
                assert_eq!(attempts, MARGIN_REJECTION_CAP);
                assert!(hint.contains("margin"));
            }
            other => panic!("expected rejection cap, got {other:?}"),
        }
    }

    fn relu_cfg() -> ReluStreamConfig {
        ReluStreamConfig {
            n: 4,
            d: 6,
            rho: 0.5,
            alpha: 2.0,
            teacher_seed: 42,
            n_samples: 64,
            informative_filter: None,
            max_rejections: 1000,
        }
    }

    #[test]
    fn relu_stream_is_realizable_to_float_precision() {
        let (teacher, stream) = gen_relu_stream(&relu_cfg(), RngSeed::new(5, 0)).unwrap();
        assert!((teacher.w1_star.dot(&teacher.w1_star) - 1.0).abs() < 1e-12);
        assert!((teacher.w2_frobenius() - 2.0).abs() < 1e-12);
        let teacher_p = ReluNetParams::new(teacher.w1_star.clone(), teacher.w2_star.clone())
            .unwrap();
        for ex in &stream {
            let z = Array1::from_vec(ex.features.to_dense());
            let want = teacher.label_for(&z).unwrap();
            let Label::RealTarget(y) = ex.label else { panic!("realizable labels are real") };
            let denom = want.abs().max(1e-12);
            assert!((y - want).abs() / denom <= 1e-12, "label must come from the teacher");
            assert_eq!(expected_loss(&teacher_p, &teacher, &z).unwrap(), 0.0);
        }
    }

    #[test]
    fn relu_batch_generator_rejects_the_informative_filter() {
        let mut cfg = relu_cfg();
        cfg.informative_filter = Some(std::f64::consts::FRAC_PI_3);
        let err = gen_relu_stream(&cfg, RngSeed::new(5, 0));
        assert!(matches!(err, Err(Error::InvalidParam(_))));
    }

    #[test]
    fn informative_sampler_meets_the_cosine_threshold() {
        let mut cfg = relu_cfg();
        cfg.informative_filter = Some(std::f64::consts::FRAC_PI_3);
        let mut sampler = ReluStreamSampler::new(&cfg, RngSeed::new(6, 0)).unwrap();
        // A learner iterate well away from the teacher.
        let mut rng = RngSeed::new(77, 0).rng();
        let p = ReluNetParams::new(
            Array1::from_iter((0..cfg.n).map(|_| rng.sample::<f64, _>(StandardNormal))),
            Array2::from_shape_fn((cfg.n, cfg.d), |_| rng.sample::<f64, _>(StandardNormal)),
        )
        .unwrap();
        let teacher = sampler.teacher().clone();
        for _ in 0..50 {
            let (z, y) = sampler.next_informative(&p).unwrap();
            let c = informative_sample_cosine(&p, &teacher, &z).unwrap();
            assert!(c >= 0.5 - 1e-12, "accepted sample has cosine {c}");
            assert_eq!(y, teacher.label_for(&z).unwrap());
        }
    }

    #[test]
    fn informative_sampler_reports_exhausted_budget() {
        let mut cfg = relu_cfg();
        // cos ε just under 1: nearly impossible to satisfy by chance in 6-d.
        cfg.informative_filter = Some(1e-6);
        cfg.max_rejections = 25;
        let mut sampler = ReluStreamSampler::new(&cfg, RngSeed::new(6, 0)).unwrap();
        let p = ReluNetParams::new(Array1::ones(cfg.n), Array2::ones((cfg.n, cfg.d))).unwrap();
        match sampler.next_informative(&p) {
            Err(Error::RejectionCap { attempts: 25, .. }) => {}
            other => panic!("expected rejection cap, got {other:?}"),
        }
    }

    #[test]
    fn permutation_is_deterministic_and_preserves_the_multiset() {
        let cfg = ConvexStreamConfig {
            dim: 4,
            k: 1,
            n_samples: 32,
            margin: 0.0,
            feature_frequency_skew: 0.0,
            noise_rate: 0.5,
            shift_at: None,
        };
        let stream = gen_convex_stream(&cfg, RngSeed::new(3, 0)).unwrap();
        let a = permute_order(&stream, RngSeed::new(100, 0));
        let b = permute_order(&stream, RngSeed::new(100, 0));
        assert_eq!(a, b, "same permutation seed, same order");
        let c = permute_order(&stream, RngSeed::new(101, 0));
        assert_ne!(a, c, "different seeds should differ on 32 items");
        let key = |ex: &LabeledExample| format!("{ex:?}");
        let mut sa: Vec<_> = a.iter().map(key).collect();
        let mut ss: Vec<_> = stream.iter().map(key).collect();
        sa.sort();
        ss.sort();
        assert_eq!(sa, ss, "permutation must preserve the multiset");
    }

    #[test]
    fn stream_source_applies_order_and_repeat() {
        let cfg = ConvexStreamConfig {
            dim: 3,
            k: 1,
            n_samples: 8,
            margin: 0.0,
            feature_frequency_skew: 0.0,
            noise_rate: 0.0,
            shift_at: None,
        };
        let source = StreamSource {
            kind: SourceKind::SyntheticConvex(cfg.clone()),
            order: Order::Permuted(RngSeed::new(9, 0)),
            repeat: 3,
        };
        let (teacher, stream) = source.materialize(RngSeed::new(1, 0)).unwrap();
        assert!(teacher.is_none());
        assert_eq!(stream.len(), 24);
        assert_eq!(&stream[0..8], &stream[8..16], "each pass repeats the same order");
        let base = gen_convex_stream(&cfg, RngSeed::new(1, 0)).unwrap();
        assert_eq!(stream[0..8], permute_order(&base, RngSeed::new(9, 0))[..]);
    }
}
