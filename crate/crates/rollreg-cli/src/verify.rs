//! Fast in-binary self-checks behind the `verify` subcommand: one headline
//! invariant per module, each finishing in well under a second, printed as
//! PASS/FAIL lines. The exhaustive suite lives in the test targets; this is
//! the smoke test an installed binary can run anywhere.

use ndarray::{arr1, arr2, Array1, Array2};

use rollreg::core::{FeatureVector, Label, LabeledExample, RngSeed};
use rollreg::data::{gen_convex_stream, permute_order, ConvexStreamConfig};
use rollreg::losses::{grad_check, ConvexLoss};
use rollreg::optimizers_convex::{AdamState, BoxBound, OgdState};
use rollreg::regret::{rolling_regret, WindowOracle, WindowSpec};
use rollreg::relu_net::{
    dnn_gd_step, expected_loss, DnnAdamCoeffs, DnnAdamState, ReluNetParams, TeacherParams,
};

use crate::config::parse_config_str;
use crate::report::emit_csv;
use crate::runner::{run_experiment, run_hash};

type Check = fn() -> Result<(), String>;

/// Runs every check, printing one PASS/FAIL line each; returns overall
/// success.
pub fn run_verification() -> bool {
    let checks: &[(&str, Check)] = &[
        ("ridge subgradient matches finite differences", ridge_gradient),
        ("gradient-descent trace matches hand computation", ogd_hand_trace),
        ("adaptive step retains weights on zero gradient", adam_zero_gradient),
        ("default momentum coefficients satisfy the ratio condition", momentum_ratio),
        ("hand-built rolling regret is exact", hand_regret),
        ("covering windows enumerate every admissible offset", covering_offsets),
        ("gated-network expected loss matches its closed form", closed_form_loss),
        ("rescaled gradient step keeps norm and product invariants", gd_rescale),
        ("adaptive network second moments are column-constant and monotone", adam_moments),
        ("permuted order preserves the sample multiset", permutation),
        ("config canonical text and run hash are stable", config_stability),
        ("demo experiment writes byte-identical CSVs on rerun", determinism),
    ];
    let mut ok = true;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                ok = false;
                println!("FAIL {name}: {e}");
            }
        }
    }
    ok
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn err<T: std::fmt::Display>(e: T) -> String {
    e.to_string()
}

fn example(x: &[f64], y: f64) -> Result<LabeledExample, String> {
    Ok(LabeledExample::new(FeatureVector::from_dense(x).map_err(err)?, Label::RealTarget(y)))
}

fn ridge_gradient() -> Result<(), String> {
    let loss = ConvexLoss::ridge_quadratic(1.0).map_err(err)?;
    let ex = example(&[0.4, -1.2, 0.7], 0.9)?;
    let gap = grad_check(&loss, &[0.3, 0.1, -0.5], &ex, 1e-6).map_err(err)?;
    ensure(gap < 1e-5, || format!("finite-difference gap {gap}"))
}

fn ogd_hand_trace() -> Result<(), String> {
    // Squared error, x = [1], y = 1, rate 1/4: w goes 0 -> 1/2 -> 3/4.
    let loss = ConvexLoss::SquaredError;
    let ex = example(&[1.0], 1.0)?;
    let bx = BoxBound::disabled();
    let mut state = OgdState::new(vec![0.0]).map_err(err)?;
    for want in [0.5, 0.75] {
        let g = loss.subgradient(state.w(), &ex).map_err(err)?;
        state.step(&g, 0.25, &bx).map_err(err)?;
        ensure((state.w()[0] - want).abs() < 1e-15, || {
            format!("expected {want}, got {}", state.w()[0])
        })?;
    }
    Ok(())
}

fn adam_zero_gradient() -> Result<(), String> {
    let w0 = [0.7, -0.3, 0.001];
    let mut state = AdamState::new(w0.to_vec(), 0.8, 0.81).map_err(err)?;
    let bx = BoxBound::disabled();
    for t in 0..100 {
        state.step(&[0.0; 3], 0.5, &bx).map_err(err)?;
        for (i, w0i) in w0.iter().enumerate() {
            ensure(state.w()[i].to_bits() == w0i.to_bits(), || {
                format!("weight {i} moved to {} at step {}", state.w()[i], t + 1)
            })?;
        }
    }
    Ok(())
}

fn momentum_ratio() -> Result<(), String> {
    let lambda = 0.8 / 0.81f64.sqrt();
    ensure(lambda < 1.0, || format!("beta1/sqrt(beta2) = {lambda}"))
}

fn hand_regret() -> Result<(), String> {
    // Four identical samples with target 0: the offline optimum is w = 0
    // with zero loss, so each window's regret is its online-loss sum.
    let stream: Vec<LabeledExample> =
        (0..4).map(|_| example(&[1.0], 0.0)).collect::<Result<_, _>>()?;
    let loss_log = [1.0, 0.5, 0.25, 0.125];
    let windows = WindowSpec::covering(1, 4).map_err(err)?;
    let oracle = WindowOracle::Quadratic { loss: ConvexLoss::SquaredError };
    let report = rolling_regret(&loss_log, &stream, &windows, &oracle).map_err(err)?;
    let want = [1.5, 0.75, 0.375];
    ensure(report.records.len() == 3, || format!("{} windows", report.records.len()))?;
    for (rec, want) in report.records.iter().zip(want) {
        ensure((rec.regret - want).abs() < 1e-12, || {
            format!("offset {}: regret {} want {want}", rec.offset, rec.regret)
        })?;
    }
    ensure(report.max_regret == 1.5 && report.argmax_offset == 0, || {
        format!("max {} at {}", report.max_regret, report.argmax_offset)
    })
}

fn covering_offsets() -> Result<(), String> {
    let offsets = WindowSpec::covering(3, 10).map_err(err)?.offsets();
    ensure(offsets == (0..=6).collect::<Vec<_>>(), || format!("{offsets:?}"))
}

fn student_teacher() -> Result<(ReluNetParams, TeacherParams), String> {
    let w1 = arr1(&[0.6, -0.8, 0.1]);
    let w2 = arr2(&[
        [0.2, -0.1, 0.3, 0.05],
        [0.1, 0.4, -0.2, 0.15],
        [-0.3, 0.2, 0.1, -0.25],
    ]);
    let p = ReluNetParams::new(w1, w2).map_err(err)?;
    let teacher = TeacherParams::new(
        arr1(&[0.5, 0.5, -0.7]),
        arr2(&[
            [0.3, 0.1, -0.2, 0.4],
            [-0.1, 0.2, 0.3, -0.3],
            [0.2, -0.4, 0.1, 0.2],
        ]),
        0.5,
    )
    .map_err(err)?;
    Ok((p, teacher))
}

fn closed_form_loss() -> Result<(), String> {
    let (p, teacher) = student_teacher()?;
    let z = arr1(&[0.9, -0.4, 0.2, 1.1]);
    let got = expected_loss(&p, &teacher, &z).map_err(err)?;
    let delta = p.product() - teacher.product();
    let want = 0.5 * teacher.rho * teacher.rho * delta.dot(&z).powi(2);
    ensure((got - want).abs() <= 1e-12 * want.abs().max(1.0), || format!("{got} vs {want}"))
}

fn gd_rescale() -> Result<(), String> {
    let (mut p, _) = student_teacher()?;
    let xi1 = 1.3;
    let g1 = arr1(&[0.1, -0.2, 0.05]);
    let g2 = Array2::from_shape_fn((3, 4), |(i, j)| 0.02 * (i as f64 + j as f64) - 0.03);
    for step in 0..20 {
        let w1_raw: Array1<f64> = &p.w1 - &(0.05 * &g1);
        let w2_raw: Array2<f64> = &p.w2 - &(0.05 * &g2);
        let raw_product = w1_raw.dot(&w2_raw);
        p = dnn_gd_step(&p, &g1, &g2, 0.05, xi1).map_err(err)?;
        let norm_sq = p.w1.dot(&p.w1);
        ensure((norm_sq - (0.5 + xi1)).abs() <= 1e-12 * (0.5 + xi1), || {
            format!("step {step}: norm^2 {norm_sq}")
        })?;
        let product = p.product();
        for (a, b) in product.iter().zip(raw_product.iter()) {
            ensure((a - b).abs() <= 1e-10 * b.abs().max(1.0), || {
                format!("step {step}: product {a} vs unrescaled {b}")
            })?;
        }
    }
    Ok(())
}

fn adam_moments() -> Result<(), String> {
    let (p, _) = student_teacher()?;
    let coeffs = DnnAdamCoeffs {
        beta111: 0.8,
        beta121: 0.8,
        beta21: 0.81,
        beta22: 0.81,
        gamma1: 0.99,
        gamma2: 0.99,
        xi2: 1.0,
    };
    let mut state = DnnAdamState::new(p, coeffs).map_err(err)?;
    let mut prev1: Array1<f64> = Array1::zeros(3);
    let mut prev2: Array2<f64> = Array2::zeros((3, 4));
    for t in 0..50 {
        let g1 = Array1::from_shape_fn(3, |i| ((t * 3 + i) as f64).sin());
        let g2 = Array2::from_shape_fn((3, 4), |(i, j)| ((t * 12 + i * 4 + j) as f64).cos());
        state.step(&g1, &g2, 0.01).map_err(err)?;
        for j in 0..4 {
            for i in 1..3 {
                ensure(state.v2()[(i, j)] == state.v2()[(0, j)], || {
                    format!("step {t}: v2 column {j} not constant")
                })?;
            }
        }
        for (now, before) in state.v1_hat().iter().zip(prev1.iter()) {
            ensure(now >= before, || format!("step {t}: v1_hat decreased"))?;
        }
        for (now, before) in state.v2_hat().iter().zip(prev2.iter()) {
            ensure(now >= before, || format!("step {t}: v2_hat decreased"))?;
        }
        prev1 = state.v1_hat().clone();
        prev2 = state.v2_hat().clone();
    }
    Ok(())
}

fn permutation() -> Result<(), String> {
    let cfg = ConvexStreamConfig {
        dim: 5,
        k: 3,
        n_samples: 40,
        margin: 0.1,
        feature_frequency_skew: 0.5,
        noise_rate: 0.0,
        shift_at: None,
    };
    let natural = gen_convex_stream(&cfg, RngSeed::new(5, 0)).map_err(err)?;
    let permuted = permute_order(&natural, RngSeed::new(9, 3));
    let canon = |s: &[LabeledExample]| -> Vec<String> {
        let mut v: Vec<String> = s.iter().map(|ex| format!("{ex:?}")).collect();
        v.sort();
        v
    };
    ensure(canon(&natural) == canon(&permuted), || "multisets differ".into())?;
    let same_order = natural
        .iter()
        .zip(&permuted)
        .all(|(a, b)| format!("{a:?}") == format!("{b:?}"));
    ensure(!same_order, || "permutation left 40 samples in place".into())
}

const DEMO_CONFIG: &str = "\
[source]
kind = synthetic_convex

[stream]
dim = 4
classes = 1
samples = 60

[task]
loss = ridge
h = 1.0

[optimizer]
kind = ogd
eta1 = 0.5

[windows]
t = 4

[run]
seeds = 1
decimate = 10
";

fn config_stability() -> Result<(), String> {
    let a = parse_config_str(DEMO_CONFIG).map_err(err)?;
    let b = parse_config_str(DEMO_CONFIG).map_err(err)?;
    ensure(a.canonical_string() == b.canonical_string(), || "canonical text differs".into())?;
    let hash = run_hash(&a, 1);
    ensure(hash.len() == 12 && hash.chars().all(|c| c.is_ascii_hexdigit()), || {
        format!("run hash {hash:?}")
    })?;
    ensure(hash == run_hash(&b, 1), || "hash differs across parses".into())
}

fn determinism() -> Result<(), String> {
    let cfg = parse_config_str(DEMO_CONFIG).map_err(err)?;
    let base = std::env::temp_dir().join(format!("rollreg-verify-{}", std::process::id()));
    let result = (|| -> Result<(), String> {
        let mut bytes = Vec::new();
        for round in 0..2 {
            let dir = base.join(round.to_string());
            let outcomes = run_experiment(&cfg).map_err(err)?;
            let files = emit_csv(&outcomes, &dir).map_err(err)?;
            let mut all = std::fs::read(&files.runs).map_err(err)?;
            for w in &files.windows {
                all.extend(std::fs::read(w).map_err(err)?);
            }
            bytes.push(all);
        }
        ensure(bytes[0] == bytes[1], || "reruns differ".into())
    })();
    let _ = std::fs::remove_dir_all(&base);
    result
}
