mod common;

use std::sync::OnceLock;

use laionc_core::builder::{decode_output_path, encode_output_path};
use laionc_core::imgcore::band_bounds;
use laionc_core::metrics::{error_consistency, kendall_tau_b, wilson_interval, Kappa, Observation, ObservationLog};
use laionc_core::patchpool::PatchPool;
use laionc_core::{apply, CorruptionKind, CorruptionSpec, ImageBuffer, SeedContext, Severity, Taxonomy};
use proptest::prelude::*;

fn tax() -> &'static Taxonomy {
    static TAX: OnceLock<Taxonomy> = OnceLock::new();
    TAX.get_or_init(Taxonomy::builtin)
}

fn pool() -> &'static PatchPool {
    static POOL: OnceLock<PatchPool> = OnceLock::new();
    POOL.get_or_init(|| common::synthetic_pool(32, 16))
}

fn log(id: &str, correct: &[bool]) -> ObservationLog {
    let mut l = ObservationLog::new(id);
    l.records = correct
        .iter()
        .enumerate()
        .map(|(i, &c)| Observation {
            image_id: format!("t{i}"),
            superclass_true: "fish".into(),
            superclass_response: if c { "fish" } else { "invalid" }.into(),
            corruption: CorruptionKind::Glitched,
            severity: Severity::new(3).unwrap(),
            response_time_ms: None,
        })
        .collect();
    l
}

fn kind_strategy() -> impl Strategy<Value = CorruptionKind> {
    prop::sample::select(CorruptionKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kappa_is_symmetric_and_bounded(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200)) {
        let a: Vec<bool> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let ab = error_consistency(&log("a", &a), &log("b", &b)).unwrap();
        let ba = error_consistency(&log("b", &b), &log("a", &a)).unwrap();
        prop_assert_eq!(ab.observed, ba.observed);
        prop_assert_eq!(ab.expected, ba.expected);
        match (ab.kappa, ba.kappa) {
            (Kappa::Value(x), Kappa::Value(y)) => {
                prop_assert!((x - y).abs() < 1e-12);
                prop_assert!((-1.0..=1.0).contains(&x));
            }
            (Kappa::Undefined, Kappa::Undefined) => {
                let constant = |v: &[bool]| v.iter().all(|&c| c) || v.iter().all(|&c| !c);
                prop_assert!(constant(&a) && constant(&b));
            }
            other => prop_assert!(false, "asymmetric outcome {:?}", other),
        }
    }

    #[test]
    fn output_paths_round_trip(
        sc in 0usize..16,
        member in 0usize..64,
        source_id in "[A-Za-z0-9][A-Za-z0-9_.-]{0,20}",
        kind in kind_strategy(),
        level in 1i64..=5,
    ) {
        let t = tax();
        let superclass = &t.superclasses()[sc];
        let members = t.members(sc);
        let fine = &t.fine_classes()[members[member % members.len()]];
        let sev = Severity::new(level).unwrap();
        let path = encode_output_path(t, superclass, fine, &source_id, kind, sev).unwrap();
        let decoded = decode_output_path(t, &path).unwrap();
        prop_assert_eq!(decoded, (superclass.clone(), fine.clone(), source_id.clone(), kind, sev));
    }

    #[test]
    fn wilson_contains_point_estimate(total in 1u64..5000, frac in 0.0f64..=1.0, level in 0.5f64..0.999) {
        let correct = ((total as f64) * frac).round() as u64;
        let (lo, hi) = wilson_interval(correct, total, level).unwrap();
        let p = correct as f64 / total as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }

    #[test]
    fn band_bounds_partition(len in 1u32..2000, parts in 1u32..300) {
        let b = band_bounds(len, parts);
        prop_assert_eq!(b.len(), parts as usize + 1);
        prop_assert_eq!((b[0], b[parts as usize]), (0, len));
        let widths: Vec<u32> = b.windows(2).map(|w| w[1] - w[0]).collect();
        let (lo, hi) = (widths.iter().min().unwrap(), widths.iter().max().unwrap());
        prop_assert!(hi - lo <= 1);
    }

    #[test]
    fn kendall_is_symmetric(pairs in prop::collection::vec((0u8..6, 0u8..6), 3..40)) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        if let (Ok(a), Ok(b)) = (kendall_tau_b(&x, &y), kendall_tau_b(&y, &x)) {
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
        }
    }

    #[test]
    fn corruptions_keep_size_and_are_deterministic(
        w in 16u32..96,
        h in 16u32..96,
        seed in any::<u64>(),
        kind in kind_strategy(),
        level in 1i64..=5,
    ) {
        let img = common::synthetic_image(w, h, seed);
        let sev = Severity::new(level).unwrap();
        let spec = CorruptionSpec::new(kind, sev);
        let ctx = SeedContext::new(seed, "prop", kind, sev);
        match apply(&img, &spec, &ctx, Some(pool())) {
            Ok(a) => {
                prop_assert_eq!((a.width(), a.height()), (w, h));
                let b = apply(&img, &spec, &ctx, Some(pool())).unwrap();
                prop_assert_eq!(a.as_raw(), b.as_raw());
            }
            // Grids finer than the image are rejected rather than degenerate.
            Err(e) => prop_assert!(matches!(kind, CorruptionKind::Mosaic | CorruptionKind::VerticalLines | CorruptionKind::LuminanceCheckerboard), "{kind}: {e}"),
        }
    }

    #[test]
    fn aggregation_is_a_member_mean(seed in any::<u64>()) {
        let t = tax();
        let mut s = laionc_core::SeedStream::for_purpose(seed, "prop/aggregate");
        let probs: Vec<f64> = (0..t.universe_len()).map(|_| s.next_f64()).collect();
        let agg = t.aggregate_probs(&probs).unwrap();
        for (i, v) in agg.iter().enumerate() {
            let m = t.members(i);
            let lo = m.iter().map(|&j| probs[j]).fold(f64::INFINITY, f64::min);
            let hi = m.iter().map(|&j| probs[j]).fold(0.0, f64::max);
            prop_assert!(lo - 1e-12 <= *v && *v <= hi + 1e-12);
        }
        let d = t.decide_index(&probs).unwrap();
        prop_assert!(agg.iter().all(|v| *v <= agg[d]));
    }
}

#[test]
fn flat_image_under_luminance_takes_two_values() {
    let img = ImageBuffer::filled(56, 56, [100, 100, 100]);
    let sev = Severity::new(1).unwrap();
    let ctx = SeedContext::new(1, "flat", CorruptionKind::LuminanceCheckerboard, sev);
    let out = apply(&img, &CorruptionSpec::new(CorruptionKind::LuminanceCheckerboard, sev), &ctx, None).unwrap();
    let mut values: Vec<u8> = out.as_raw().to_vec();
    values.sort();
    values.dedup();
    assert_eq!(values, vec![50, 150]);
}
