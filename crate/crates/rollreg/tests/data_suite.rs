//! Stream generator properties: coordinate-activity statistics, the
//! distribution-shift effect, serialization round trips for arbitrary
//! streams, and end-to-end source determinism.

use proptest::prelude::*;

use rollreg::core::{FeatureVector, Label, LabeledExample, RngSeed};
use rollreg::data::{
    gen_convex_stream, gen_convex_stream_detailed, gen_relu_stream, max_linf_norm,
    read_libsvm, write_libsvm, ConvexStreamConfig, Order, ReluStreamConfig, SourceKind,
    StreamSource,
};

#[test]
fn zero_skew_spreads_activity_evenly() {
    let cfg = ConvexStreamConfig {
        dim: 10,
        k: 1,
        n_samples: 10_000,
        margin: 0.0,
        feature_frequency_skew: 0.0,
        noise_rate: 0.0,
        shift_at: None,
    };
    let stream = gen_convex_stream(&cfg, RngSeed::new(808, 0)).unwrap();
    let mut counts = vec![0u32; cfg.dim];
    for ex in &stream {
        for &(j, _) in ex.features.entries() {
            counts[j] += 1;
        }
    }
    let max = f64::from(*counts.iter().max().unwrap());
    let min = f64::from(*counts.iter().min().unwrap());
    assert!(min > 0.0);
    assert!(
        max / min < 1.3,
        "flat skew should give near-uniform activity, got spread {}",
        max / min
    );
}

#[test]
fn positive_skew_orders_activity_by_coordinate() {
    let cfg = ConvexStreamConfig {
        dim: 10,
        k: 1,
        n_samples: 10_000,
        margin: 0.0,
        feature_frequency_skew: 1.5,
        noise_rate: 0.0,
        shift_at: None,
    };
    let stream = gen_convex_stream(&cfg, RngSeed::new(809, 0)).unwrap();
    let mut counts = vec![0u32; cfg.dim];
    for ex in &stream {
        for &(j, _) in ex.features.entries() {
            counts[j] += 1;
        }
    }
    assert!(
        counts[0] > 4 * counts[9],
        "power-law activity should decay strongly: {counts:?}"
    );
}

#[test]
fn shift_invalidates_the_pre_shift_weights() {
    let cfg = ConvexStreamConfig {
        dim: 10,
        k: 4,
        n_samples: 4_000,
        margin: 0.1,
        feature_frequency_skew: 0.3,
        noise_rate: 0.0,
        shift_at: Some(2_000),
    };
    let (eras, stream) = gen_convex_stream_detailed(&cfg, RngSeed::new(99, 0)).unwrap();
    assert_eq!(eras.len(), 2, "one re-draw of the hidden weights");
    let scores = |w: &[f64], ex: &LabeledExample| -> usize {
        let mut best = 0;
        let mut best_s = f64::NEG_INFINITY;
        for c in 0..cfg.k {
            let mut s = 0.0;
            for &(j, v) in ex.features.entries() {
                s += w[c * cfg.dim + j] * v;
            }
            if s > best_s {
                best_s = s;
                best = c;
            }
        }
        best
    };
    let mut wrong = 0u32;
    for ex in &stream[2_000..] {
        let Label::ClassId(c) = ex.label else { panic!("hinge stream labels are classes") };
        if scores(&eras[0], ex) != c {
            wrong += 1;
        }
    }
    let rate = f64::from(wrong) / 2_000.0;
    assert!(rate > 0.2, "pre-shift weights should misclassify >20%, got {rate}");
    // Sanity: the post-shift weights do label their own era.
    for ex in &stream[2_000..] {
        let Label::ClassId(c) = ex.label else { unreachable!() };
        assert_eq!(scores(&eras[1], ex), c);
    }
}

#[test]
fn relu_stream_reports_bounded_inputs() {
    let cfg = ReluStreamConfig {
        n: 3,
        d: 5,
        rho: 0.7,
        alpha: 1.5,
        teacher_seed: 1,
        n_samples: 200,
        informative_filter: None,
        max_rejections: 100,
    };
    let (_, stream) = gen_relu_stream(&cfg, RngSeed::new(12, 0)).unwrap();
    let linf = max_linf_norm(&stream);
    assert!(linf > 0.0 && linf < 6.0, "standard normal entries stay modest: {linf}");
    let (_, again) = gen_relu_stream(&cfg, RngSeed::new(12, 0)).unwrap();
    assert_eq!(stream, again, "generator must be a pure function of (cfg, seed)");
}

#[test]
fn stream_source_materialization_is_deterministic() {
    let source = StreamSource {
        kind: SourceKind::SyntheticConvex(ConvexStreamConfig {
            dim: 6,
            k: 3,
            n_samples: 30,
            margin: 0.05,
            feature_frequency_skew: 0.4,
            noise_rate: 0.1,
            shift_at: Some(15),
        }),
        order: Order::Permuted(RngSeed::new(5, 5)),
        repeat: 2,
    };
    let (_, a) = source.materialize(RngSeed::new(3, 1)).unwrap();
    let (_, b) = source.materialize(RngSeed::new(3, 1)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 60);
}

fn label_strategy() -> impl Strategy<Value = Label> {
    prop_oneof![
        (0usize..50).prop_map(Label::ClassId),
        // Finite, non-integral-biased targets; integral ones are also
        // covered and must survive the round trip as real targets.
        (-1e6..1e6f64).prop_map(Label::RealTarget),
        (-50i32..50).prop_map(|v| Label::RealTarget(f64::from(v))),
    ]
}

fn example_strategy() -> impl Strategy<Value = LabeledExample> {
    let dim = 12usize;
    (
        prop::collection::btree_map(0..dim, -1e3..1e3f64, 0..dim),
        label_strategy(),
    )
        .prop_map(move |(map, label)| {
            let entries: Vec<(usize, f64)> =
                map.into_iter().filter(|&(_, v)| v != 0.0).collect();
            LabeledExample::new(FeatureVector::new(dim, entries).unwrap(), label)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn libsvm_round_trips_arbitrary_streams(
        stream in prop::collection::vec(example_strategy(), 0..20)
    ) {
        let file = tempfile::NamedTempFile::new().unwrap();
        write_libsvm(&stream, file.path()).unwrap();
        let back = read_libsvm(file.path()).unwrap();
        prop_assert_eq!(back.len(), stream.len());
        for (a, b) in stream.iter().zip(&back) {
            prop_assert_eq!(&a.label, &b.label);
            prop_assert_eq!(a.features.entries(), b.features.entries());
        }
    }
}
