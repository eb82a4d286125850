//! The acceptance suite: eleven statistical or exact checks, each returning
//! one [`Outcome`].

use std::time::Instant;

use rayon::prelude::*;

use crate::error::Result;
use crate::ext::{negative_type_lra, ridge_coreset, ridge_objective, ridge_solve, RidgeProblem};
use crate::linalg::{self, DenseMatrix, Tolerances, Vector};
use crate::lra::{generalized_lra, sample_optimal_lra, sample_optimal_psd_output, spectral_lra_small, PipelineConfig, SpectralMode};
use crate::oracle::{Corruption, EntryAccess, InstanceSpec, QueryOracle, RobustSplit};
use crate::pcp::{
    column_pcp_diagonal, column_pcp_ridge, diagonal_pcp_size, ridge_pcp_size, row_pcp_diagonal, row_pcp_ridge,
    verify_pcp, PcpSketch,
};
use crate::reference::{dense_ridge_solve, exact_lra_error, exact_statdim};
use crate::rng::{gaussian_matrix, stream, streams, trial_seed};
use crate::robust::{correlation_lra, robust_lra, RobustConfig};
use crate::scores::{approx_ridge_sqrt, build_sampler, ridge_leverage_exact, ridge_sqrt_exact, row_norms_sq, SamplerMode};
use crate::specreg::{embedding_window, spectral_cost, spectral_opt_exact, spectral_reg_sketched, ColumnSource};

pub const CRITERIA: [(u8, &str); 11] = [
    (1, "relative_error_lra"),
    (2, "query_scaling"),
    (3, "pcp_certification"),
    (4, "spectral_regression"),
    (5, "generalized_lra"),
    (6, "robust_pipeline"),
    (7, "correlation"),
    (8, "negative_type"),
    (9, "ridge_regression"),
    (10, "instance_identities"),
    (11, "structural_invariants"),
];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub summary: String,
    pub metrics: Vec<(String, f64)>,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<22} {}  {} [{:.1}s]",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.summary,
            self.seconds
        )
    }

    fn error(id: u8, name: &'static str, e: crate::Error, seconds: f64) -> Self {
        Outcome {
            id,
            name,
            passed: false,
            summary: format!("error: {e}"),
            metrics: Vec::new(),
            seconds,
        }
    }
}

struct Verdict {
    passed: bool,
    summary: String,
    metrics: Vec<(String, f64)>,
}

/// Runs criterion `id` (1..=11) rooted at `seed`.
pub fn run_criterion(id: u8, seed: u64) -> Option<Outcome> {
    let &(_, name) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let result = match id {
        1 => relative_error(seed),
        2 => query_scaling(seed),
        3 => pcp_certification(seed),
        4 => spectral_regression(seed),
        5 => generalized(seed),
        6 => robust(seed),
        7 => correlation(seed),
        8 => negative_type(seed),
        9 => ridge(seed),
        10 => identities(seed),
        _ => structural(seed),
    };
    let seconds = start.elapsed().as_secs_f64();
    Some(match result {
        Ok(v) => Outcome {
            id,
            name,
            passed: v.passed,
            summary: v.summary,
            metrics: v.metrics,
            seconds,
        },
        Err(e) => Outcome::error(id, name, e, seconds),
    })
}

pub fn run_suite(seed: u64) -> Vec<Outcome> {
    CRITERIA.iter().filter_map(|c| run_criterion(c.0, seed)).collect()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        s[m / 2]
    } else {
        0.5 * (s[m / 2 - 1] + s[m / 2])
    }
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn rate(hits: usize, total: usize) -> f64 {
    hits as f64 / total.max(1) as f64
}

const SEEDS: u64 = 20;

// 1

fn relative_error(seed: u64) -> Result<Verdict> {
    let (n, k, eps) = (1024, 5, 0.25);
    let tails = [0.05, 0.1, 0.2, 0.5, 1.0];
    let start = Instant::now();
    let cfg = PipelineConfig::default();
    let mut ratios = Vec::new();
    let mut queries = Vec::new();
    for (i, &tail) in tails.iter().enumerate() {
        let inst = InstanceSpec::random_psd(n, k, tail, trial_seed(seed, i as u64)).generate()?;
        let truth = inst.oracle.ground_truth();
        let opt = exact_lra_error(truth, k)?;
        let runs: Vec<Result<(f64, f64)>> = (0..SEEDS)
            .into_par_iter()
            .map(|s| {
                let o = inst.oracle.replica();
                let run = sample_optimal_lra(&o, k, eps, &cfg, trial_seed(seed ^ 0xA1, i as u64 * 100 + s))?;
                Ok((run.factors.error_sq(truth) / opt, run.queries_total as f64))
            })
            .collect();
        for r in runs {
            let (ratio, q) = r?;
            ratios.push(ratio);
            queries.push(q);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let hits = ratios.iter().filter(|r| **r <= 1.0 + eps).count();
    let n2 = (n * n) as f64;
    let med_q = median(&queries);
    let c7 = med_q / (n as f64 * k as f64 * (n as f64).ln().powi(3) / eps);
    let success = rate(hits, ratios.len());
    let passed = success >= 0.9 && med_q <= 0.2 * n2 && secs <= 180.0;
    Ok(Verdict {
        passed,
        summary: format!(
            "{hits}/{} within 1+eps, median ratio {:.3}, median queries {:.3}n^2, C7 {:.4}, {:.0}s",
            ratios.len(),
            median(&ratios),
            med_q / n2,
            c7,
            secs
        ),
        metrics: vec![
            ("success_rate".into(), success),
            ("median_ratio".into(), median(&ratios)),
            ("max_ratio".into(), max(&ratios)),
            ("median_queries_over_n2".into(), med_q / n2),
            ("c7".into(), c7),
            ("seconds".into(), secs),
        ],
    })
}

// 2

fn query_scaling(seed: u64) -> Result<Verdict> {
    let (k, eps, tail) = (5, 0.25, 0.2);
    let cfg = PipelineConfig::default();
    let sizes = [512usize, 1024, 2048];
    let mut medians = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let inst = InstanceSpec::random_psd(n, k, tail, trial_seed(seed, 200 + i as u64)).generate()?;
        let qs: Vec<Result<f64>> = (0..5u64)
            .into_par_iter()
            .map(|s| {
                let o = inst.oracle.replica();
                Ok(sample_optimal_lra(&o, k, eps, &cfg, trial_seed(seed ^ 0xA2, s))?.queries_total as f64)
            })
            .collect();
        medians.push(median(&qs.into_iter().collect::<Result<Vec<_>>>()?));
    }
    let growth: Vec<f64> = medians.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(Verdict {
        passed: growth.iter().all(|g| *g <= 2.6),
        summary: format!(
            "median queries {:.0} / {:.0} / {:.0}, growth {:.2}x then {:.2}x",
            medians[0], medians[1], medians[2], growth[0], growth[1]
        ),
        metrics: vec![("growth_1".into(), growth[0]), ("growth_2".into(), growth[1])],
    })
}

// 3

/// Oversampling constants of the sketch-size formulas used for certification.
pub const C3: f64 = 4.0;
pub const C4: f64 = 2.0;

fn pcp_certification(seed: u64) -> Result<Verdict> {
    let (n, k, eps, eta) = (256, 3, 0.5, 0.04);
    let mut lines = Vec::new();
    let mut metrics = Vec::new();
    let mut all = true;
    for (c, name) in ["ridge_column", "ridge_row", "diagonal_column", "diagonal_row"].iter().enumerate() {
        let results: Vec<Result<(bool, f64)>> = (0..SEEDS)
            .into_par_iter()
            .map(|s| {
                let iseed = trial_seed(seed, 300 + s);
                let mut rng = stream(trial_seed(seed ^ 0xA3, c as u64 * 100 + s), streams::VERIFY);
                let (sketch, observed, truth) = if c < 2 {
                    let inst = InstanceSpec::random_psd(n, k, 0.3, iseed).generate()?;
                    let o = &inst.oracle;
                    let scores = approx_ridge_sqrt(o, k, &Default::default(), &mut rng)?.values;
                    let t = ridge_pcp_size(n, k, eps, C3);
                    let col = column_pcp_ridge(n, &scores, k, eps, t, &mut rng)?;
                    let sk: PcpSketch = if c == 0 { col } else { row_pcp_ridge(&col, o, &scores, k, eps, t, &mut rng)? };
                    (sk, o.observed(), o.ground_truth().clone())
                } else {
                    let inst = InstanceSpec::correlation(n, k, 0.3, eta, Corruption::Dense, iseed).generate()?;
                    let o = &inst.oracle;
                    let diag: Vec<f64> = o.diagonal()?.iter().copied().collect();
                    let t = diagonal_pcp_size(n, k, eps, inst.meta.phi_max, C4);
                    let col = column_pcp_diagonal(&diag, k, eps, eta, t, &mut rng)?;
                    let sk = if c == 2 { col } else { row_pcp_diagonal(&col, o, &diag, k, eps, eta, t, &mut rng)? };
                    (sk, o.observed(), o.ground_truth().clone())
                };
                let rep = verify_pcp(&sketch, &observed, &truth, 100, &mut rng)?;
                Ok((rep.passed(), rep.max_violation))
            })
            .collect();
        let results = results.into_iter().collect::<Result<Vec<_>>>()?;
        let hits = results.iter().filter(|r| r.0).count();
        let ok = rate(hits, results.len()) >= 0.9;
        all &= ok;
        lines.push(format!("{name} {hits}/{}", results.len()));
        metrics.push((format!("{name}_rate"), rate(hits, results.len())));
        metrics.push((format!("{name}_max_violation"), max(&results.iter().map(|r| r.1).collect::<Vec<_>>())));
    }
    Ok(Verdict {
        passed: all,
        summary: format!("clean seeds: {}", lines.join(", ")),
        metrics,
    })
}

// 4

fn spectral_regression(seed: u64) -> Result<Verdict> {
    // exact optimum against random competitors
    let mut violations = 0usize;
    for inst in 0..50u64 {
        let mut rng = stream(trial_seed(seed, 400 + inst), streams::VERIFY);
        let (n, m, r) = (60, 40, 8);
        let decay = DenseMatrix::from_fn(m, m, |i, j| if i == j { 1.0 / (1.0 + i as f64) } else { 0.0 });
        let c = gaussian_matrix(n, m, &mut rng) * decay;
        let z = linalg::orthonormal_basis(&gaussian_matrix(m, r, &mut rng));
        let (w_star, opt) = spectral_opt_exact(&c, &z)?;
        let scale = linalg::frobenius_sq(&w_star).sqrt().max(1.0);
        for j in 0..100 {
            let g = gaussian_matrix(n, r, &mut rng);
            let w = if j % 4 == 0 {
                g * (scale / (n * r) as f64).sqrt()
            } else {
                let step = 10f64.powf(-6.0 + 7.0 * (j as f64 / 100.0));
                &w_star + g * (step * scale / (n * r) as f64).sqrt()
            };
            if spectral_cost(&c, &w, &z) < opt - 1e-9 * (1.0 + opt) {
                violations += 1;
            }
        }
    }

    // sketched solver on pipeline-shaped problems
    let (n, k, eps) = (512, 5, 0.25);
    let cfg = PipelineConfig::default();
    let k_prime = cfg.k_prime(n, k, eps);
    let limit = 20.0 * (n as f64).ln().powi(2);
    let sketched: Vec<Result<(f64, f64, f64)>> = (0..SEEDS)
        .into_par_iter()
        .map(|s| {
            let inst = InstanceSpec::random_psd(n, k, 0.2, trial_seed(seed, 450 + s)).generate()?;
            let o = &inst.oracle;
            let truth = o.ground_truth();
            let mut rng = stream(trial_seed(seed ^ 0xA4, s), streams::SPECTRAL_REGRESSION);
            let scores = approx_ridge_sqrt(o, k_prime, &cfg.scores, &mut rng)?.values;
            let t = cfg.pcp_size(n, k_prime);
            let col = column_pcp_ridge(n, &scores, k_prime, cfg.pcp_eps, t, &mut rng)?;
            let row = row_pcp_ridge(&col, o, &scores, k_prime, cfg.pcp_eps, t, &mut rng)?;
            let z = spectral_lra_small(row.sketch.as_ref().expect("materialized"), k_prime, SpectralMode::Exact, &mut rng)?;
            let c = col.columns.select_cols(truth);
            let reg = spectral_reg_sketched(&ColumnSource::Dense(&c), &z, k, eps, &cfg.specreg, &mut rng)?;
            let (_, opt) = spectral_opt_exact(&c, &z)?;
            let tail = linalg::svd(&c)?.tail_energy(z.ncols());
            let ratio = spectral_cost(&c, &reg.w_hat, &z) / (opt + eps / k as f64 * tail);
            let (lo, hi) = embedding_window(&z, &reg.sampler)?;
            Ok((ratio, lo, hi))
        })
        .collect();
    let sketched = sketched.into_iter().collect::<Result<Vec<_>>>()?;
    let ratio_hits = sketched.iter().filter(|r| r.0 <= limit).count();

    // subspace embedding at accuracy 1/10 and failure probability 1/100
    let (m, r) = (20_000, 8);
    let oversample = (r as f64 / 0.01).ln() / (0.1 * 0.1);
    let windows: Vec<Result<(f64, f64)>> = (0..SEEDS)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream(trial_seed(seed ^ 0xA5, s), streams::VERIFY);
            let z = linalg::orthonormal_basis(&gaussian_matrix(m, r, &mut rng));
            let sampler = build_sampler(&row_norms_sq(&z), 0, SamplerMode::Independent { oversample }, &mut rng)?;
            embedding_window(&z, &sampler)
        })
        .collect();
    let windows = windows.into_iter().collect::<Result<Vec<_>>>()?;
    let window_hits = windows.iter().filter(|(lo, hi)| *lo > 0.9 && *hi < 1.1).count();

    let ratios: Vec<f64> = sketched.iter().map(|r| r.0).collect();
    let pipeline_lo = sketched.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let pipeline_hi = max(&sketched.iter().map(|r| r.2).collect::<Vec<_>>());
    let passed = violations == 0 && rate(ratio_hits, sketched.len()) >= 0.9 && rate(window_hits, windows.len()) >= 0.9;
    Ok(Verdict {
        passed,
        summary: format!(
            "optimum violations {violations}/5000; sketched ratio {ratio_hits}/{} <= {limit:.0} (max {:.2}); \
             window {window_hits}/{} in (0.9, 1.1); pipeline-rate window [{pipeline_lo:.2}, {pipeline_hi:.2}]",
            sketched.len(),
            max(&ratios),
            windows.len()
        ),
        metrics: vec![
            ("optimum_violations".into(), violations as f64),
            ("max_sketched_ratio".into(), max(&ratios)),
            ("median_sketched_ratio".into(), median(&ratios)),
            ("window_rate".into(), rate(window_hits, windows.len())),
            ("pipeline_window_lo".into(), pipeline_lo),
            ("pipeline_window_hi".into(), pipeline_hi),
        ],
    })
}

// 5

fn generalized(seed: u64) -> Result<Verdict> {
    let mut violations = 0usize;
    let mut worst_gap = f64::INFINITY;
    for inst in 0..50u64 {
        let mut rng = stream(trial_seed(seed, 500 + inst), streams::VERIFY);
        let (p, q, bw, ch, k) = (30, 25, 6, 5, 3);
        let a = gaussian_matrix(p, q, &mut rng);
        let b = gaussian_matrix(p, bw, &mut rng);
        let c = gaussian_matrix(ch, q, &mut rng);
        let cost = |x: &DenseMatrix| linalg::frobenius_sq(&(&a - &b * x * &c));
        let x_star = generalized_lra(&a, &b, &c, k)?;
        let best = cost(&x_star);
        let slack = 1e-9 * (1.0 + best);
        let svd = linalg::svd(&x_star)?;
        let u = svd.u.columns(0, k) * DenseMatrix::from_diagonal(&svd.singular_values.rows(0, k).into_owned());
        let v = svd.vt.rows(0, k).into_owned();
        let scale = linalg::frobenius_sq(&x_star).sqrt().max(1.0);
        for _ in 0..200 {
            let g = gaussian_matrix(bw, k, &mut rng) * gaussian_matrix(k, ch, &mut rng);
            let g = &g * (scale / linalg::frobenius_sq(&g).sqrt().max(1e-300));
            let gap = cost(&g) - best;
            worst_gap = worst_gap.min(gap / (1.0 + best));
            if gap < -slack {
                violations += 1;
            }
        }
        for j in 0..200 {
            let step = 10f64.powf(-7.0 + 6.0 * (j as f64 / 200.0));
            let du = gaussian_matrix(bw, k, &mut rng) * (step * scale);
            let dv = gaussian_matrix(k, ch, &mut rng) * step;
            let x = (&u + du) * (&v + dv);
            let gap = cost(&x) - best;
            worst_gap = worst_gap.min(gap / (1.0 + best));
            if gap < -slack {
                violations += 1;
            }
        }
    }
    Ok(Verdict {
        passed: violations == 0,
        summary: format!("{violations} violations over 50 instances x 400 competitors, worst relative gap {worst_gap:.2e}"),
        metrics: vec![("violations".into(), violations as f64), ("worst_relative_gap".into(), worst_gap)],
    })
}

// 6

struct AdditiveRuns {
    hits: usize,
    total: usize,
    worst: f64,
    max_q: f64,
    median_q: f64,
}

fn additive_runs<F>(specs: Vec<InstanceSpec>, k: usize, bound: f64, run: F) -> Result<AdditiveRuns>
where
    F: Fn(&QueryOracle, f64, u64) -> Result<(crate::lra::LowRankFactors, u64)> + Sync,
{
    let rows: Vec<Result<(f64, f64)>> = specs
        .into_par_iter()
        .enumerate()
        .map(|(s, spec)| {
            let inst = spec.generate()?;
            let truth = inst.oracle.ground_truth();
            let opt = exact_lra_error(truth, k)?;
            let total = linalg::frobenius_sq(truth);
            let (f, q) = run(&inst.oracle, inst.meta.phi_max, s as u64)?;
            Ok(((f.error_sq(truth) - opt) / total, q as f64))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let excess: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let qs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(AdditiveRuns {
        hits: excess.iter().filter(|e| **e <= bound).count(),
        total: rows.len(),
        worst: max(&excess),
        max_q: max(&qs),
        median_q: median(&qs),
    })
}

fn robust(seed: u64) -> Result<Verdict> {
    let (n, k, eps, eta): (usize, usize, f64, f64) = (1000, 1, 0.2, 0.04);
    let bound = 3.0 * (eps + eta.sqrt());
    let specs = (0..SEEDS).map(|s| InstanceSpec::robust_nu(n, eps, eta, k, trial_seed(seed, 600 + s))).collect();
    let runs = additive_runs(specs, k, bound, |o, phi, s| {
        let r = robust_lra(o, &RobustConfig::new(k, eps, eta, phi), trial_seed(seed ^ 0xA6, s))?;
        Ok((r.factors, r.queries_total))
    })?;
    let n2 = (n * n) as f64;

    // growth of queries/φ² on the norm-matched lower-bound instance
    let mut normalized = Vec::new();
    let mut phis = Vec::new();
    for (i, &m) in [500usize, 1000, 2000].iter().enumerate() {
        let rows: Vec<Result<(f64, f64)>> = (0..5u64)
            .into_par_iter()
            .map(|s| {
                let spec = InstanceSpec::robust_mu(m, eps, eta, k, RobustSplit::NormMatched, trial_seed(seed, 650 + 10 * i as u64 + s));
                let inst = spec.generate()?;
                let phi = inst.meta.phi_max;
                let r = robust_lra(&inst.oracle, &RobustConfig::new(k, eps, eta, phi), trial_seed(seed ^ 0xA7, s))?;
                Ok((r.queries_total as f64 / (phi * phi), phi))
            })
            .collect();
        let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
        normalized.push(median(&rows.iter().map(|r| r.0).collect::<Vec<_>>()));
        phis.push(median(&rows.iter().map(|r| r.1).collect::<Vec<_>>()));
    }
    let growth: Vec<f64> = normalized.windows(2).map(|w| w[1] / w[0]).collect();
    let passed = rate(runs.hits, runs.total) >= 0.9 && runs.max_q <= 0.5 * n2 && growth.iter().all(|g| *g <= 2.6);
    Ok(Verdict {
        passed,
        summary: format!(
            "{}/{} within additive bound {bound:.2} (worst excess {:.4}), max queries {:.3}n^2; \
             queries/phi^2 growth {:.2}x then {:.2}x (phi {:.2} / {:.2} / {:.2})",
            runs.hits,
            runs.total,
            runs.worst,
            runs.max_q / n2,
            growth[0],
            growth[1],
            phis[0],
            phis[1],
            phis[2]
        ),
        metrics: vec![
            ("success_rate".into(), rate(runs.hits, runs.total)),
            ("worst_excess".into(), runs.worst),
            ("max_queries_over_n2".into(), runs.max_q / n2),
            ("median_queries_over_n2".into(), runs.median_q / n2),
            ("growth_1".into(), growth[0]),
            ("growth_2".into(), growth[1]),
            ("phi_500".into(), phis[0]),
            ("phi_1000".into(), phis[1]),
            ("phi_2000".into(), phis[2]),
        ],
    })
}

// 7

fn correlation(seed: u64) -> Result<Verdict> {
    let (n, k, eps, eta): (usize, usize, f64, f64) = (1000, 1, 0.2, 0.04);
    let bound = 3.0 * (eps + eta.sqrt());
    let specs = (0..SEEDS)
        .map(|s| InstanceSpec::correlation(n, k, 0.3, eta, Corruption::Dense, trial_seed(seed, 700 + s)))
        .collect();
    let runs = additive_runs(specs, k, bound, |o, _, s| {
        let r = correlation_lra(o, k, eps, eta, trial_seed(seed ^ 0xA8, s))?;
        Ok((r.factors, r.queries_total))
    })?;

    // a diagonal-only corruption must not change anything
    let invariant: Vec<Result<bool>> = (0..5u64)
        .into_par_iter()
        .map(|s| {
            let inst = InstanceSpec::correlation(400, k, 0.3, 0.0, Corruption::None, trial_seed(seed, 750 + s)).generate()?;
            let clean = inst.oracle.ground_truth().clone();
            let mut rng = stream(trial_seed(seed ^ 0xA9, s), streams::VERIFY);
            let bumps = gaussian_matrix(400, 1, &mut rng);
            let mut hidden = clean.clone();
            for i in 0..400 {
                hidden[(i, i)] += 1.0 + bumps[(i, 0)].abs();
            }
            let a = QueryOracle::new(clean.clone())?;
            let b = QueryOracle::with_ground_truth(hidden, clean)?;
            let ra = correlation_lra(&a, k, eps, eta, s)?;
            let rb = correlation_lra(&b, k, eps, eta, s)?;
            Ok(ra.factors.m == rb.factors.m && ra.factors.n == rb.factors.n && ra.stages == rb.stages)
        })
        .collect();
    let invariant = invariant.into_iter().collect::<Result<Vec<_>>>()?;
    let matched = invariant.iter().filter(|b| **b).count();
    let n2 = (n * n) as f64;
    let passed = rate(runs.hits, runs.total) >= 0.9 && matched == invariant.len();
    Ok(Verdict {
        passed,
        summary: format!(
            "{}/{} within additive bound {bound:.2} (worst excess {:.4}), median queries {:.3}n^2; \
             diagonal-corruption invariance {matched}/{}",
            runs.hits,
            runs.total,
            runs.worst,
            runs.median_q / n2,
            invariant.len()
        ),
        metrics: vec![
            ("success_rate".into(), rate(runs.hits, runs.total)),
            ("worst_excess".into(), runs.worst),
            ("median_queries_over_n2".into(), runs.median_q / n2),
            ("invariance_rate".into(), rate(matched, invariant.len())),
        ],
    })
}

// 8

fn negative_type(seed: u64) -> Result<Verdict> {
    let (n, dim, k, eps, noise) = (512, 20, 5, 0.3, 0.05);
    let cfg = PipelineConfig::distance();
    let rows: Vec<Result<(f64, usize, f64)>> = (0..SEEDS)
        .into_par_iter()
        .map(|s| {
            let inst = InstanceSpec::negative_type(n, dim, k, noise, trial_seed(seed, 800 + s)).generate()?;
            let truth = inst.oracle.ground_truth();
            let opt = exact_lra_error(truth, k)?;
            let run = negative_type_lra(&inst.oracle, k, eps, &cfg, trial_seed(seed ^ 0xAA, s))?;
            let rank = linalg::svd(&run.factors.reconstruct())?.rank(Tolerances::DEFAULT.rel_cutoff);
            let exact_k = run.factors.m.ncols() == k && rank == k;
            Ok((run.factors.error_sq(truth) / opt, if exact_k { k } else { rank }, run.queries_total as f64))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let hits = ratios.iter().filter(|r| **r <= 1.0 + eps).count();
    let rank_ok = rows.iter().all(|r| r.1 == k);
    let med_q = median(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    Ok(Verdict {
        passed: rate(hits, rows.len()) >= 0.9 && rank_ok,
        summary: format!(
            "{hits}/{} within 1+eps (max ratio {:.3}), output rank exactly k: {rank_ok}, median queries {:.3}n^2",
            rows.len(),
            max(&ratios),
            med_q / (n * n) as f64
        ),
        metrics: vec![
            ("success_rate".into(), rate(hits, rows.len())),
            ("max_ratio".into(), max(&ratios)),
            ("median_queries_over_n2".into(), med_q / (n * n) as f64),
        ],
    })
}

// 9

fn ridge(seed: u64) -> Result<Verdict> {
    let (n, eps) = (512, 0.5);
    let cfg = PipelineConfig::default();
    let rows: Vec<Result<(usize, usize, bool, f64)>> = (0..5u64)
        .into_par_iter()
        .map(|s| {
            let inst = InstanceSpec::random_psd(n, 5, 0.01, trial_seed(seed, 900 + s)).generate()?;
            let a = inst.oracle.ground_truth();
            let sigma_1 = linalg::spectral_norm(a);
            let lambda = 0.01 * sigma_1 * sigma_1;
            let s_hat = exact_statdim(a, lambda)?.max(1.0);
            let coreset = ridge_coreset(&inst.oracle, &RidgeProblem::new(lambda, s_hat, eps), &cfg, trial_seed(seed ^ 0xAB, s))?;
            let frozen = inst.oracle.queries();
            let mut rng = stream(trial_seed(seed ^ 0xAC, s), streams::VERIFY);
            let mut hits = 0;
            let mut worst: f64 = 0.0;
            for _ in 0..100 {
                let y = Vector::from_iterator(n, gaussian_matrix(n, 1, &mut rng).iter().copied());
                let x = ridge_solve(&coreset, &y, lambda)?;
                let x_star = dense_ridge_solve(a, &y, lambda)?;
                let ratio = ridge_objective(a, &x, &y, lambda) / ridge_objective(a, &x_star, &y, lambda);
                worst = worst.max(ratio);
                if ratio <= 1.0 + eps {
                    hits += 1;
                }
            }
            Ok((hits, 100, inst.oracle.queries() == frozen, worst))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let hits: usize = rows.iter().map(|r| r.0).sum();
    let total: usize = rows.iter().map(|r| r.1).sum();
    let frozen = rows.iter().all(|r| r.2);
    let worst = max(&rows.iter().map(|r| r.3).collect::<Vec<_>>());
    Ok(Verdict {
        passed: rate(hits, total) >= 0.9 && frozen,
        summary: format!("{hits}/{total} objectives within 1+eps (worst ratio {worst:.4}), counter frozen: {frozen}"),
        metrics: vec![("success_rate".into(), rate(hits, total)), ("worst_ratio".into(), worst)],
    })
}

// 10

fn identities(seed: u64) -> Result<Verdict> {
    let mut failures = Vec::new();
    for (i, &(n, k, eps)) in [(100, 2, 0.08), (64, 1, 0.125), (400, 3, 0.05), (1000, 5, 0.02)].iter().enumerate() {
        let inst = InstanceSpec::mw_blocks(n, k, eps, trial_seed(seed, 1000 + i as u64)).generate()?;
        let realized = linalg::frobenius_sq(inst.oracle.ground_truth());
        let from_blocks = n as f64 + inst.meta.blocks.iter().map(|b| (b.len() * (b.len() - 1)) as f64).sum::<f64>();
        let side = inst.meta.blocks.first().map_or(1, |b| b.len()) as f64;
        // ⌈·⌉ on the block side moves k·b² by less than k·(2b + 1)
        let slack = k as f64 * (2.0 * side + 1.0);
        if realized != from_blocks || (realized - (1.0 + 2.0 * eps) * n as f64).abs() > slack {
            failures.push(format!("mw_blocks n={n}"));
        }
    }
    let mut worst: f64 = 0.0;
    for (i, &n) in [500usize, 1000, 2000].iter().enumerate() {
        let inst = InstanceSpec::robust_mu(n, 0.2, 0.04, 1, RobustSplit::NormMatched, trial_seed(seed, 1100 + i as u64)).generate()?;
        let truth = inst.oracle.ground_truth();
        let noise = inst.oracle.observed() - truth;
        let rel = linalg::frobenius_sq(&noise) / (0.04 * linalg::frobenius_sq(truth)) - 1.0;
        worst = worst.max(rel.abs());
        if rel.abs() > 0.01 {
            failures.push(format!("robust_mu n={n}"));
        }
    }
    Ok(Verdict {
        passed: failures.is_empty(),
        summary: if failures.is_empty() {
            format!("block Frobenius identities exact; noise energy within {:.2e} of eta", worst)
        } else {
            format!("failed: {}", failures.join(", "))
        },
        metrics: vec![("noise_energy_rel_error".into(), worst)],
    })
}

// 11

fn structural(seed: u64) -> Result<Verdict> {
    let mut failures = Vec::new();
    let specs = [
        InstanceSpec::random_psd(300, 4, 0.3, trial_seed(seed, 1200)),
        InstanceSpec::correlation(300, 3, 0.3, 0.0, Corruption::None, trial_seed(seed, 1201)),
        InstanceSpec::mw_blocks(200, 2, 0.1, trial_seed(seed, 1202)),
        InstanceSpec::robust_mu(300, 0.2, 0.04, 1, RobustSplit::NormMatched, trial_seed(seed, 1203)),
        InstanceSpec::robust_nu(300, 0.2, 0.04, 2, trial_seed(seed, 1204)),
        InstanceSpec::ridge_hard(300, 0.04, 0.2, trial_seed(seed, 1205)),
    ];

    // row norms bounded by ‖A‖₂·A_ii, and ridge scores of A^{1/2} summing to at most 2k
    for spec in &specs {
        let inst = spec.generate()?;
        let a = inst.oracle.ground_truth();
        let top = linalg::spectral_norm(a);
        for i in 0..a.nrows() {
            let lhs = a.row(i).norm_squared();
            let rhs = top * a[(i, i)];
            if lhs > rhs * (1.0 + 1e-9) + 1e-12 * top * top {
                failures.push(format!("row bound {} row {i}", spec.family));
                break;
            }
        }
        let k = spec.k.max(1);
        let sum: f64 = ridge_sqrt_exact(a, k)?.values.iter().sum();
        if sum > 2.0 * k as f64 * (1.0 + 1e-9) {
            failures.push(format!("ridge sum {} = {sum}", spec.family));
        }
    }
    let mut rng = stream(trial_seed(seed, 1210), streams::VERIFY);
    for j in 0..10 {
        let m = gaussian_matrix(80, 30, &mut rng);
        let k = 1 + j % 6;
        let sum: f64 = ridge_leverage_exact(&m, k)?.values.iter().sum();
        if sum > 2.0 * k as f64 * (1.0 + 1e-9) {
            failures.push(format!("ridge leverage sum {sum} > 2k"));
        }
    }

    // Penrose identities, including rank-deficient and wide inputs
    let tol = Tolerances::DEFAULT.pinv;
    for j in 0..20 {
        let (r, c, rank) = [(40, 20, 20), (20, 40, 20), (30, 30, 7), (25, 10, 3)][j % 4];
        let a = gaussian_matrix(r, rank, &mut rng) * gaussian_matrix(rank, c, &mut rng);
        let p = linalg::pseudoinverse(&a)?;
        let scale = 1.0 + linalg::spectral_norm(&a) * linalg::spectral_norm(&p);
        let apa = &a * &p * &a - &a;
        let pap = &p * &a * &p - &p;
        let ap = &a * &p;
        let pa = &p * &a;
        let residuals = [
            apa.amax() / linalg::spectral_norm(&a).max(1e-300),
            pap.amax() / linalg::spectral_norm(&p).max(1e-300),
            (&ap - ap.transpose()).amax(),
            (&pa - pa.transpose()).amax(),
        ];
        if residuals.iter().any(|x| *x > tol * scale) {
            failures.push(format!("penrose {r}x{c} rank {rank}: residual {:.2e}", residuals.iter().copied().fold(0.0, f64::max)));
        }
    }

    // PSD output and query conservation across every pipeline
    let cfg = PipelineConfig::default();
    let conserve = |name: &str, stages: &[(String, u64)], total: u64, delta: u64, failures: &mut Vec<String>| {
        let sum: u64 = stages.iter().map(|s| s.1).sum();
        if sum != total || total != delta {
            failures.push(format!("{name}: stages {sum}, total {total}, oracle {delta}"));
        }
    };
    for s in 0..3u64 {
        let inst = InstanceSpec::random_psd(400, 3, 0.3, trial_seed(seed, 1220 + s)).generate()?;
        let o = &inst.oracle;
        let run = sample_optimal_psd_output(o, 3, 0.3, &cfg, s)?;
        conserve("psd_output", &run.stages, run.queries_total, o.queries(), &mut failures);
        let mmt = run.factors.reconstruct();
        let e = linalg::sym_eigen(&((&mmt + mmt.transpose()) * 0.5))?;
        let lo = e.values[e.values.len() - 1];
        if lo < -1e-9 * e.values[0].max(1.0) {
            failures.push(format!("psd output min eigenvalue {lo:.2e}"));
        }
        o.reset_queries();
        let run = sample_optimal_lra(o, 3, 0.3, &cfg, s)?;
        conserve("relative_lra", &run.stages, run.queries_total, o.queries(), &mut failures);
    }
    {
        let inst = InstanceSpec::robust_nu(400, 0.2, 0.04, 1, trial_seed(seed, 1230)).generate()?;
        let run = robust_lra(&inst.oracle, &RobustConfig::new(1, 0.2, 0.04, inst.meta.phi_max), 1)?;
        conserve("robust", &run.stages, run.queries_total, inst.oracle.queries(), &mut failures);
        let inst = InstanceSpec::correlation(400, 1, 0.3, 0.04, Corruption::Dense, trial_seed(seed, 1231)).generate()?;
        let run = correlation_lra(&inst.oracle, 1, 0.2, 0.04, 2)?;
        conserve("correlation", &run.stages, run.queries_total, inst.oracle.queries(), &mut failures);
        let inst = InstanceSpec::negative_type(300, 10, 3, 0.05, trial_seed(seed, 1232)).generate()?;
        let run = negative_type_lra(&inst.oracle, 3, 0.3, &PipelineConfig::distance(), 3)?;
        conserve("distance", &run.stages, run.queries_total, inst.oracle.queries(), &mut failures);
        let inst = InstanceSpec::random_psd(300, 3, 0.05, trial_seed(seed, 1233)).generate()?;
        let c = ridge_coreset(&inst.oracle, &RidgeProblem::new(1.0, 4.0, 0.5), &cfg, 4)?;
        conserve("ridge", &c.stages, c.queries, inst.oracle.queries(), &mut failures);
    }
    Ok(Verdict {
        passed: failures.is_empty(),
        summary: if failures.is_empty() {
            "row-norm bound, ridge-score sums, Penrose identities, PSD output and query conservation hold".into()
        } else {
            format!("{} failure(s): {}", failures.len(), failures.join("; "))
        },
        metrics: vec![("failures".into(), failures.len() as f64)],
    })
}
