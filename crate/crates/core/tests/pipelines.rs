use psdlra::ext::{negative_type_lra, ridge_coreset, RidgeProblem};
use psdlra::harness::{run_trial, verify_report, Trial};
use psdlra::linalg;
use psdlra::lra::{sample_optimal_lra, sample_optimal_psd_output, PipelineConfig};
use psdlra::oracle::{Corruption, EntryAccess, InstanceSpec, QueryOracle, RobustSplit};
use psdlra::reference::{exact_lra_error, exact_statdim};
use psdlra::report::Algorithm;
use psdlra::robust::{correlation_lra, robust_lra, RobustConfig};

fn stage_sum(stages: &[(String, u64)]) -> u64 {
    stages.iter().map(|s| s.1).sum()
}

#[test]
fn relative_error_run_is_sublinear_and_accurate() {
    let inst = InstanceSpec::random_psd(512, 4, 0.2, 3).generate().unwrap();
    let truth = inst.oracle.ground_truth();
    let run = sample_optimal_lra(&inst.oracle, 4, 0.25, &PipelineConfig::default(), 1).unwrap();
    let ratio = run.factors.error_sq(truth) / exact_lra_error(truth, 4).unwrap();
    assert!(ratio <= 1.25, "ratio {ratio}");
    assert!(run.queries_total < 512 * 512 / 2);
    assert_eq!(run.queries_total, inst.oracle.queries());
    assert_eq!(stage_sum(&run.stages), run.queries_total);
    assert!(run.factors.rank_bound() <= 4);
}

#[test]
fn same_seed_same_run() {
    let spec = InstanceSpec::random_psd(256, 3, 0.2, 9);
    let a = spec.generate().unwrap();
    let b = spec.generate().unwrap();
    let cfg = PipelineConfig::default();
    let ra = sample_optimal_lra(&a.oracle, 3, 0.3, &cfg, 5).unwrap();
    let rb = sample_optimal_lra(&b.oracle, 3, 0.3, &cfg, 5).unwrap();
    assert_eq!(ra.stages, rb.stages);
    assert_eq!(ra.factors.reconstruct(), rb.factors.reconstruct());
}

#[test]
fn psd_output_has_no_negative_eigenvalues() {
    let inst = InstanceSpec::random_psd(300, 3, 0.3, 4).generate().unwrap();
    let run = sample_optimal_psd_output(&inst.oracle, 3, 0.3, &PipelineConfig::default(), 2).unwrap();
    let b = run.factors.reconstruct();
    assert!(linalg::is_symmetric(&b, 1e-9 * b.amax().max(1.0)));
    let eig = linalg::sym_eigen(&b).unwrap();
    let lo = eig.values.min();
    let hi = eig.values.max();
    assert!(lo >= -1e-9 * hi.max(1.0), "min eigenvalue {lo}");
}

#[test]
fn robust_run_meets_additive_bound() {
    let (n, k, eps, eta) = (600, 3, 0.3, 0.04);
    let inst = InstanceSpec::robust_mu(n, eps, eta, k, RobustSplit::NormMatched, 2).generate().unwrap();
    let truth = inst.oracle.ground_truth();
    let cfg = RobustConfig::new(k, eps, eta, inst.meta.phi_max.max(1.0));
    let run = robust_lra(&inst.oracle, &cfg, 6).unwrap();
    let err = run.factors.error_sq(truth) - exact_lra_error(truth, k).unwrap();
    assert!(err <= 3.0 * (eps + eta.sqrt()) * linalg::frobenius_sq(truth));
    assert_eq!(stage_sum(&run.stages), run.queries_total);
    assert_eq!(run.queries_total, inst.oracle.queries());
}

#[test]
fn correlation_run_ignores_the_diagonal() {
    let spec = InstanceSpec::correlation(300, 3, 0.2, 0.02, Corruption::Dense, 8);
    let inst = spec.generate().unwrap();
    let clean = inst.oracle.ground_truth().clone();
    let mut shifted = inst.oracle.observed();
    for i in 0..300 {
        shifted[(i, i)] += 1.0 + i as f64;
    }
    let other = QueryOracle::with_ground_truth(shifted, clean).unwrap();
    let a = correlation_lra(&inst.oracle, 3, 0.3, 0.02, 1).unwrap();
    let b = correlation_lra(&other, 3, 0.3, 0.02, 1).unwrap();
    assert_eq!(a.stages, b.stages);
    assert_eq!(a.factors.reconstruct(), b.factors.reconstruct());
}

#[test]
fn distance_run_returns_rank_k() {
    let inst = InstanceSpec::negative_type(300, 12, 4, 0.05, 5).generate().unwrap();
    let truth = inst.oracle.ground_truth();
    let run = negative_type_lra(&inst.oracle, 4, 0.3, &PipelineConfig::distance(), 3).unwrap();
    let b = run.factors.reconstruct();
    assert_eq!(linalg::svd(&b).unwrap().rank(1e-9), 4);
    let ratio = run.factors.error_sq(truth) / exact_lra_error(truth, 4).unwrap();
    assert!(ratio <= 1.3, "ratio {ratio}");
    assert_eq!(stage_sum(&run.stages), run.queries_total);
}

#[test]
fn ridge_coreset_rank_and_frozen_queries() {
    let inst = InstanceSpec::random_psd(300, 4, 0.01, 12).generate().unwrap();
    let a = inst.oracle.ground_truth();
    let sigma = linalg::spectral_norm(a);
    let lambda = 0.01 * sigma * sigma;
    let s = exact_statdim(a, lambda).unwrap();
    let problem = RidgeProblem::new(lambda, s, 0.5);
    assert_eq!(problem.rank(), (s / 0.25).ceil() as usize);
    let coreset = ridge_coreset(&inst.oracle, &problem, &PipelineConfig::default(), 2).unwrap();
    assert_eq!(coreset.queries, inst.oracle.queries());
    assert!(coreset.spectral_error_sq(a) <= 0.25 * lambda * 4.0);
}

#[test]
fn harness_reports_reproduce() {
    for alg in [Algorithm::RelativeLra, Algorithm::Ridge] {
        let trial = Trial::new(alg, InstanceSpec::random_psd(200, 3, 0.2, 4), 3, 0.3, 11);
        let report = run_trial(&trial).unwrap();
        let (_, diffs) = verify_report(&report, 1e-12).unwrap();
        assert!(diffs.is_empty(), "{alg}: {diffs:?}");
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    let inst = InstanceSpec::random_psd(50, 2, 0.2, 1).generate().unwrap();
    let cfg = PipelineConfig::default();
    assert!(sample_optimal_lra(&inst.oracle, 0, 0.3, &cfg, 1).is_err());
    assert!(sample_optimal_lra(&inst.oracle, 51, 0.3, &cfg, 1).is_err());
    assert!(sample_optimal_lra(&inst.oracle, 2, 1.5, &cfg, 1).is_err());
    assert!(RobustConfig::new(2, 0.3, 0.04, 0.5).validate().is_err());
}
