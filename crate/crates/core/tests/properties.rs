use proptest::prelude::*;

use psdlra::linalg::{self, DenseMatrix};
use psdlra::lra::{sample_optimal_lra, PipelineConfig};
use psdlra::oracle::{EntryAccess, InstanceSpec};
use psdlra::report::{reports_from_json, reports_to_json, Algorithm, ErrorMetrics, RunReport};
use psdlra::rng::{gaussian_matrix, stream};
use psdlra::scores::{build_sampler, SamplerMode};

fn low_rank(m: usize, n: usize, r: usize, seed: u64) -> DenseMatrix {
    let mut rng = stream(seed, 0);
    gaussian_matrix(m, r, &mut rng) * gaussian_matrix(r, n, &mut rng)
}

fn metric() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => -1e6..1e6f64,
        1 => Just(f64::INFINITY),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(0.0),
    ]
}

prop_compose! {
    fn report()(
        alg in 0..Algorithm::ALL.len(),
        n in 10..5000usize,
        seed in any::<u64>(),
        trial in 0..1000u64,
        k in 1..10usize,
        eps in 0.01..0.99f64,
        stages in prop::collection::vec(("[a-z_]{1,12}", 0..1_000_000u64), 0..6),
        metrics in (metric(), metric(), metric(), metric()),
        passed in any::<bool>(),
        extra in prop::collection::vec(("[a-z_]{1,10}", metric()), 0..4),
        flags in prop::collection::vec("[ -~]{0,30}", 0..3),
    ) -> RunReport {
        let mut stages = stages;
        stages.sort();
        stages.dedup_by(|a, b| a.0 == b.0);
        let mut extra = extra;
        extra.sort_by(|a, b| a.0.cmp(&b.0));
        extra.dedup_by(|a, b| a.0 == b.0);
        RunReport {
            algorithm: Algorithm::ALL[alg],
            spec: InstanceSpec::random_psd(n, k, 0.2, seed),
            seed,
            trial,
            k,
            eps,
            queries_total: stages.iter().map(|s| s.1).sum(),
            stages,
            metrics: ErrorMetrics {
                frobenius_sq_error: metrics.0,
                optimum: metrics.1,
                relative_ratio: metrics.2,
                additive_ratio: metrics.3,
            },
            passed,
            wall_time: 0.5,
            constants: vec![("t_factor".into(), 0.2)],
            extra,
            flags,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn report_json_round_trip(reports in prop::collection::vec(report(), 1..4)) {
        let text = serde_json::to_string(&reports_to_json(&reports)).unwrap();
        let back = reports_from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back, reports);
    }

    #[test]
    fn with_replacement_sampler(scores in prop::collection::vec(0.0..10.0f64, 1..60), t in 1..200usize, seed in any::<u64>()) {
        prop_assume!(scores.iter().sum::<f64>() > 0.0);
        let total: f64 = scores.iter().sum();
        let s = build_sampler(&scores, t, SamplerMode::WithReplacement, &mut stream(seed, 1)).unwrap();
        prop_assert_eq!(s.len(), t);
        for (&i, &w) in s.indices().iter().zip(s.weights()) {
            prop_assert!(i < scores.len());
            prop_assert!(scores[i] > 0.0);
            let expect = 1.0 / (t as f64 * scores[i] / total).sqrt();
            prop_assert!((w - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn independent_sampler(scores in prop::collection::vec(0.0..1.0f64, 1..80), oversample in 0.1..20.0f64, seed in any::<u64>()) {
        prop_assume!(scores.iter().sum::<f64>() > 0.0);
        let s = build_sampler(&scores, 0, SamplerMode::Independent { oversample }, &mut stream(seed, 2)).unwrap();
        prop_assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
        for (j, &sc) in scores.iter().enumerate() {
            let q = (sc * oversample).min(1.0);
            match s.indices().iter().position(|&i| i == j) {
                Some(p) => {
                    prop_assert!(q > 0.0);
                    prop_assert!((s.weights()[p] - 1.0 / q.sqrt()).abs() <= 1e-12 / q.sqrt());
                }
                None => prop_assert!(q < 1.0),
            }
        }
    }

    #[test]
    fn penrose_identities(m in 1..30usize, n in 1..30usize, r in 0..8usize, seed in any::<u64>()) {
        let a = low_rank(m, n, r.min(m).min(n), seed);
        let p = linalg::pseudoinverse(&a).unwrap();
        let scale = 1.0 + a.norm() * p.norm();
        let tol = 1e-9 * scale;
        prop_assert!((&a * &p * &a - &a).norm() <= tol * a.norm().max(1.0));
        prop_assert!((&p * &a * &p - &p).norm() <= tol * p.norm().max(1.0));
        let ap = &a * &p;
        let pa = &p * &a;
        prop_assert!((&ap - ap.transpose()).norm() <= tol);
        prop_assert!((&pa - pa.transpose()).norm() <= tol);
    }

    #[test]
    fn svd_reconstructs(m in 1..40usize, n in 1..40usize, r in 0..10usize, seed in any::<u64>()) {
        let a = low_rank(m, n, r.min(m).min(n), seed);
        let s = linalg::svd(&a).unwrap();
        let p = s.singular_values.len();
        prop_assert_eq!(p, m.min(n));
        prop_assert!(s.singular_values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let mut us = s.u.clone();
        for j in 0..p {
            us.column_mut(j).scale_mut(s.singular_values[j]);
        }
        prop_assert!((us * &s.vt - &a).norm() <= 1e-10 * a.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn queries_are_conserved(n in 40..160usize, k in 1..5usize, eps in 0.2..0.6f64, seed in any::<u64>()) {
        let inst = InstanceSpec::random_psd(n, k, 0.2, seed).generate().unwrap();
        let run = sample_optimal_lra(&inst.oracle, k, eps, &PipelineConfig::default(), seed ^ 1).unwrap();
        prop_assert_eq!(run.stages.iter().map(|s| s.1).sum::<u64>(), run.queries_total);
        prop_assert_eq!(inst.oracle.queries(), run.queries_total);
        prop_assert!(run.queries_total <= (n * n) as u64);
        prop_assert!(run.factors.is_finite());
    }
}
