//! One trial of one algorithm on one generated instance, evaluated against
//! the instance's ground truth. Shared by the command line and the tests.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::ext::{negative_type_lra, ridge_coreset, ridge_objective, ridge_solve, RidgeProblem};
use crate::linalg::{self, Vector};
use crate::lra::{sample_optimal_lra, sample_optimal_psd_output, LowRankFactors, PipelineConfig};
use crate::oracle::{EntryAccess, Family, InstanceSpec};
use crate::reference::{dense_ridge_solve, exact_lra_error, exact_statdim};
use crate::report::{Algorithm, ErrorMetrics, RunReport};
use crate::rng::{gaussian_matrix, stream, streams, trial_seed};
use crate::robust::{correlation_lra, robust_lra, RobustConfig};

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub algorithm: Algorithm,
    pub spec: InstanceSpec,
    pub k: usize,
    pub eps: f64,
    pub seed: u64,
    pub trial: u64,
    /// Robust runs: overrides the instance's own `φ_max`.
    pub phi_max: Option<f64>,
    /// Robust runs: total query cap.
    pub budget: Option<u64>,
    /// Ridge runs: `λ = lambda_scale · σ₁(A)²`.
    pub lambda_scale: f64,
    /// Ridge runs: right-hand sides drawn for evaluation.
    pub right_hand_sides: usize,
}

impl Trial {
    pub fn new(algorithm: Algorithm, spec: InstanceSpec, k: usize, eps: f64, seed: u64) -> Self {
        Trial {
            algorithm,
            spec,
            k,
            eps,
            seed,
            trial: 0,
            phi_max: None,
            budget: None,
            lambda_scale: 0.01,
            right_hand_sides: 100,
        }
    }

    /// Trial `index` of a sweep rooted at `seed`: a fresh instance and a
    /// fresh algorithm seed, both derived from `(seed, index)`.
    pub fn nth(&self, seed: u64, index: u64) -> Self {
        Trial {
            spec: self.spec.with_seed(trial_seed(seed, 2 * index)),
            seed: trial_seed(seed, 2 * index + 1),
            trial: index,
            ..self.clone()
        }
    }

    /// Rebuilds the trial that produced `report`.
    pub fn from_report(report: &RunReport) -> Result<Self> {
        let extra = |name: &str| report.extra.iter().find(|e| e.0 == name).map(|e| e.1);
        let mut t = Trial::new(report.algorithm, report.spec.clone(), report.k, report.eps, report.seed);
        t.trial = report.trial;
        t.phi_max = extra("phi_max_override");
        t.budget = extra("budget").map(|b| b as u64);
        if let Some(l) = extra("lambda_scale") {
            t.lambda_scale = l;
        }
        if let Some(y) = extra("right_hand_sides") {
            t.right_hand_sides = y as usize;
        }
        Ok(t)
    }

    /// Additive slack allowed to the robust and correlation runs.
    pub fn additive_bound(&self) -> f64 {
        3.0 * (self.eps + self.spec.eta.sqrt())
    }
}

/// Runs `trial` and evaluates it.
pub fn run_trial(trial: &Trial) -> Result<RunReport> {
    let inst = trial.spec.generate()?;
    let oracle = &inst.oracle;
    let truth = oracle.ground_truth();
    let (k, eps) = (trial.k, trial.eps);
    let start = Instant::now();
    let mut extra = Vec::new();
    let mut flags = Vec::new();
    let pipeline = if trial.spec.family == Family::NegativeType {
        PipelineConfig::distance()
    } else {
        PipelineConfig::default()
    };

    let (factors, stages, total, constants): (LowRankFactors, _, _, _) = match trial.algorithm {
        Algorithm::RelativeLra | Algorithm::PsdOutput => {
            let run = if trial.algorithm == Algorithm::PsdOutput {
                sample_optimal_psd_output(oracle, k, eps, &pipeline, trial.seed)?
            } else {
                sample_optimal_lra(oracle, k, eps, &pipeline, trial.seed)?
            };
            flags.extend(run.flags);
            (run.factors, run.stages, run.queries_total, run.sizes)
        }
        Algorithm::Robust | Algorithm::Correlation => {
            let phi = trial.phi_max.unwrap_or(inst.meta.phi_max.max(1.0));
            let mut cfg = RobustConfig::new(k, eps, trial.spec.eta, phi);
            cfg.query_budget = trial.budget;
            if let Some(p) = trial.phi_max {
                extra.push(("phi_max_override".to_string(), p));
            }
            if let Some(b) = trial.budget {
                extra.push(("budget".to_string(), b as f64));
            }
            let run = if trial.algorithm == Algorithm::Robust {
                robust_lra(oracle, &cfg, trial.seed)?
            } else {
                correlation_lra(oracle, k, eps, trial.spec.eta, trial.seed)?
            };
            extra.push(("phi_max".to_string(), if trial.algorithm == Algorithm::Robust { phi } else { 1.0 }));
            flags.extend(run.flags);
            (run.factors, run.stages, run.queries_total, run.sizes)
        }
        Algorithm::Distance => {
            if trial.spec.family != Family::NegativeType {
                return Err(Error::InvalidInput("distance runs need a negative_type instance".into()));
            }
            let run = negative_type_lra(oracle, k, eps, &pipeline, trial.seed)?;
            flags.extend(run.flags);
            (run.factors, run.stages, run.queries_total, run.sizes)
        }
        Algorithm::Ridge => {
            let sigma = linalg::spectral_norm(truth);
            let lambda = trial.lambda_scale * sigma * sigma;
            let s_hat = exact_statdim(truth, lambda)?.max(1.0);
            let problem = RidgeProblem::new(lambda, s_hat, eps);
            let coreset = ridge_coreset(oracle, &problem, &pipeline, trial.seed)?;
            let frozen = oracle.queries();
            let mut rng = stream(trial.seed, streams::VERIFY);
            let n = truth.nrows();
            let mut hits = 0;
            let mut worst: f64 = 0.0;
            for _ in 0..trial.right_hand_sides {
                let y = Vector::from_iterator(n, gaussian_matrix(n, 1, &mut rng).iter().copied());
                let x = ridge_solve(&coreset, &y, lambda)?;
                let x_star = dense_ridge_solve(truth, &y, lambda)?;
                let r = ridge_objective(truth, &x, &y, lambda) / ridge_objective(truth, &x_star, &y, lambda);
                worst = worst.max(r);
                if r <= 1.0 + eps {
                    hits += 1;
                }
            }
            if oracle.queries() != frozen {
                flags.push("ridge: queries after construction".into());
            }
            if coreset.degenerate {
                flags.push("ridge: k >= n, full read".into());
            }
            extra.extend([
                ("lambda".to_string(), lambda),
                ("lambda_scale".to_string(), trial.lambda_scale),
                ("s_hat".to_string(), s_hat),
                ("coreset_rank".to_string(), coreset.k as f64),
                ("right_hand_sides".to_string(), trial.right_hand_sides as f64),
                ("objective_hits".to_string(), hits as f64),
                ("worst_objective_ratio".to_string(), worst),
                ("spectral_error_over_eps2_lambda".to_string(), coreset.spectral_error_sq(truth) / (eps * eps * lambda)),
            ]);
            (coreset.factors, coreset.stages, coreset.queries, Vec::new())
        }
    };
    let wall_time = start.elapsed().as_secs_f64();

    let metrics = ErrorMetrics::of(&factors, truth, exact_lra_error(truth, k)?);
    let passed = match trial.algorithm {
        Algorithm::RelativeLra | Algorithm::PsdOutput | Algorithm::Distance => {
            metrics.relative_ratio <= 1.0 + eps
        }
        Algorithm::Robust | Algorithm::Correlation => metrics.additive_ratio <= trial.additive_bound(),
        Algorithm::Ridge => {
            let hits = extra.iter().find(|e| e.0 == "objective_hits").map_or(0.0, |e| e.1);
            hits >= 0.9 * trial.right_hand_sides as f64
        }
    };
    Ok(RunReport {
        algorithm: trial.algorithm,
        spec: trial.spec.clone(),
        seed: trial.seed,
        trial: trial.trial,
        k,
        eps,
        queries_total: total,
        stages,
        metrics,
        passed,
        wall_time,
        constants,
        extra,
        flags,
    })
}

/// Re-runs the trial behind `report` and compares. Returns the fresh report
/// and a list of mismatches (empty when the report reproduces).
pub fn verify_report(report: &RunReport, rel_tol: f64) -> Result<(RunReport, Vec<String>)> {
    let fresh = run_trial(&Trial::from_report(report)?)?;
    let mut diffs = Vec::new();
    if fresh.queries_total != report.queries_total {
        diffs.push(format!("queries_total {} != {}", fresh.queries_total, report.queries_total));
    }
    if fresh.stages != report.stages {
        diffs.push("per-stage queries differ".into());
    }
    let close = |a: f64, b: f64| a == b || (a - b).abs() <= rel_tol * a.abs().max(b.abs()).max(1e-300);
    let pairs = [
        ("frobenius_sq_error", fresh.metrics.frobenius_sq_error, report.metrics.frobenius_sq_error),
        ("optimum", fresh.metrics.optimum, report.metrics.optimum),
        ("relative_ratio", fresh.metrics.relative_ratio, report.metrics.relative_ratio),
    ];
    for (name, a, b) in pairs {
        if !close(a, b) {
            diffs.push(format!("{name} {a} != {b}"));
        }
    }
    if fresh.passed != report.passed {
        diffs.push("pass/fail verdict differs".into());
    }
    Ok((fresh, diffs))
}
