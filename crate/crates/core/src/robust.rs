//! Additive-error approximation under a bounded corruption `A + N`.
//!
//! Pipeline: read the diagonal, truncate every later entry to
//! `φ_max·√|d_i d_j|`, compose two diagonal-sampling PCPs into a `t × t`
//! matrix `R`, pick rows of `R` by estimated norm (FKV style), and lift the
//! resulting basis back to `n × n` with two leverage-sampled regressions.

use rand::Rng as _;

use crate::error::{Error, Result, StageExt};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::lra::{pad_basis, LowRankFactors};
use crate::oracle::{CachedSource, EntryAccess, StageMeter, Truncation};
use crate::pcp::{column_pcp_diagonal, diagonal_pcp_size, row_pcp_diagonal, PcpSketch};
use crate::rng::{stream, streams, Rng};
use crate::sampling::SamplingMatrix;
use crate::scores::{build_sampler, row_norms_sq, SamplerMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustConfig {
    pub k: usize,
    pub eps: f64,
    pub eta: f64,
    pub phi_max: f64,
    /// Cap on total queries; `t` shrinks to fit and the run is flagged.
    pub query_budget: Option<u64>,
    /// `t = ⌈pcp_factor · φ_max·√n·k²·ln n/ε²⌉`.
    pub pcp_factor: f64,
    /// Frobenius estimate reads `⌈frobenius_factor · φ_max²·n⌉` entries.
    pub frobenius_factor: f64,
    /// Uniform FKV rows `⌈uniform_factor · φ_max²·nk/(εt)⌉`.
    pub uniform_factor: f64,
    /// Each lift reads `⌈lift_factor · k·max(ln k, 1)/ε⌉` columns or rows.
    pub lift_factor: f64,
    /// Floor on per-row entries used by the norm estimator.
    pub min_row_samples: usize,
    pub truncate: bool,
    pub symmetric_cache: bool,
}

impl RobustConfig {
    pub fn new(k: usize, eps: f64, eta: f64, phi_max: f64) -> Self {
        RobustConfig {
            k,
            eps,
            eta,
            phi_max,
            query_budget: None,
            pcp_factor: 0.05,
            frobenius_factor: 16.0,
            uniform_factor: 1.0,
            lift_factor: 4.0,
            min_row_samples: 8,
            truncate: true,
            symmetric_cache: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        if !(self.eps < 1.0 && self.eps > self.eta && self.eta >= 0.0) {
            return Err(Error::invalid("need 1 > eps > eta >= 0"));
        }
        if !(self.phi_max >= 1.0) {
            return Err(Error::invalid("phi_max must be at least 1"));
        }
        Ok(())
    }

    pub fn pcp_size(&self, n: usize) -> usize {
        diagonal_pcp_size(n, self.k, self.eps, self.phi_max, self.pcp_factor)
    }

    pub fn lift_size(&self) -> usize {
        let k = self.k as f64;
        (self.lift_factor * k * k.ln().max(1.0) / self.eps).ceil() as usize
    }

    pub fn constants(&self) -> Vec<(String, f64)> {
        vec![
            ("phi_max".into(), self.phi_max),
            ("pcp_factor".into(), self.pcp_factor),
            ("frobenius_factor".into(), self.frobenius_factor),
            ("uniform_factor".into(), self.uniform_factor),
            ("lift_factor".into(), self.lift_factor),
            ("min_row_samples".into(), self.min_row_samples as f64),
        ]
    }
}

/// Reads through a truncation rule.
struct Truncated<'a> {
    inner: &'a dyn EntryAccess,
    rule: Truncation,
}

impl EntryAccess for Truncated<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn entry(&self, i: usize, j: usize) -> Result<f64> {
        Ok(self.rule.apply(i, j, self.inner.entry(i, j)?))
    }

    fn queries(&self) -> u64 {
        self.inner.queries()
    }
}

/// Unit diagonal without reading it; off-diagonal reads pass through.
struct UnitDiagonal<'a> {
    inner: &'a dyn EntryAccess,
}

impl EntryAccess for UnitDiagonal<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn entry(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            if i >= self.n() {
                return Err(Error::invalid(format!("entry ({i}, {j}) out of range")));
            }
            Ok(1.0)
        } else {
            self.inner.entry(i, j)
        }
    }

    fn queries(&self) -> u64 {
        self.inner.queries()
    }
}

/// `ṽ = n²·mean(A_ij²)` over `⌈c·φ_max²·n⌉` uniform entries.
pub fn estimate_frobenius(access: &dyn EntryAccess, phi_max: f64, c: f64, rng: &mut Rng) -> Result<f64> {
    let n = access.n();
    if n == 0 {
        return Ok(0.0);
    }
    let m = (c * phi_max * phi_max * n as f64).ceil().max(1.0) as usize;
    let mut sum = 0.0;
    for _ in 0..m {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let v = access.entry(i, j)?;
        sum += v * v;
    }
    Ok(sum * (n as f64) * (n as f64) / m as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowEstimate {
    pub index: usize,
    /// Unbiased estimate of `‖R_i‖²`.
    pub x_i: f64,
    pub samples_used: usize,
    pub passed_threshold: bool,
}

#[derive(Debug, Clone)]
pub struct FkvSample {
    /// Rows of `R`: heavy rows with weight 1, then uniform rows.
    pub sampler: SamplingMatrix,
    pub estimates: Vec<RowEstimate>,
    pub tau: f64,
    pub heavy: usize,
    pub uniform: usize,
}

/// Threshold row selection on a materialized `R`: rows whose estimated norm
/// exceeds `τ = φ_max²·n·ṽ/t²` are kept outright, the rest are sampled
/// uniformly and reweighted.
pub fn fkv_row_sample(
    r: &DenseMatrix,
    n: usize,
    cfg: &RobustConfig,
    v_tilde: f64,
    rng: &mut Rng,
) -> Result<FkvSample> {
    let (rows, width) = r.shape();
    if rows == 0 || width == 0 {
        return Err(Error::invalid("R must have at least one row and column"));
    }
    let t = rows.max(width) as f64;
    let (k, eps) = (cfg.k as f64, cfg.eps);
    let per_row = ((eps.powi(3) * t / k.powi(3)).ceil() as usize).max(cfg.min_row_samples);
    let phi2 = cfg.phi_max * cfg.phi_max;
    let tau = phi2 * n as f64 * v_tilde / (t * t);

    let mut estimates = Vec::with_capacity(rows);
    for i in 0..rows {
        let mut sum = 0.0;
        for _ in 0..per_row {
            let v = r[(i, rng.random_range(0..width))];
            sum += v * v;
        }
        let x_i = width as f64 * sum / per_row as f64;
        estimates.push(RowEstimate {
            index: i,
            x_i,
            samples_used: per_row,
            passed_threshold: x_i > tau,
        });
    }

    let heavy: Vec<usize> = estimates.iter().filter(|e| e.passed_threshold).map(|e| e.index).collect();
    let rest: Vec<usize> = estimates.iter().filter(|e| !e.passed_threshold).map(|e| e.index).collect();
    let s = ((cfg.uniform_factor * phi2 * n as f64 * k / (eps * t)).ceil() as usize).max(cfg.k);

    let mut indices = heavy.clone();
    let mut weights = vec![1.0; heavy.len()];
    let mut uniform = 0;
    if !rest.is_empty() {
        let w = (rest.len() as f64 / s as f64).sqrt();
        for _ in 0..s {
            indices.push(rest[rng.random_range(0..rest.len())]);
            weights.push(w);
        }
        uniform = s;
    }
    let sampler = SamplingMatrix::new(rows, indices, weights)?.dedup();
    Ok(FkvSample {
        sampler,
        estimates,
        tau,
        heavy: heavy.len(),
        uniform,
    })
}

/// Orthonormal `width(R) × k` basis `V` from the top right singular vectors
/// of the sampled rows, so that `R ≈ R V Vᵀ`. Pads with random directions
/// when the sample has rank below `k` (second value `true`).
pub fn fkv_lra(r: &DenseMatrix, sampler: &SamplingMatrix, k: usize, rng: &mut Rng) -> Result<(DenseMatrix, bool)> {
    let width = r.ncols();
    if k > width {
        return Err(Error::invalid(format!("k = {k} exceeds width {width} of R")));
    }
    let sampled = sampler.select_rows(r);
    let svd = linalg::svd(&sampled)?;
    let rank = svd.rank(linalg::Tolerances::DEFAULT.rel_cutoff).min(k);
    let v = svd.right_vectors(rank);
    Ok((pad_basis(&v, k, rng), rank < k))
}

#[derive(Debug, Clone)]
pub struct RobustRun {
    pub factors: LowRankFactors,
    pub stages: Vec<(String, u64)>,
    pub queries_total: u64,
    pub v_tilde: f64,
    pub t: usize,
    pub r_shape: (usize, usize),
    pub heavy_rows: usize,
    pub fkv_rows: usize,
    pub flags: Vec<String>,
    pub sizes: Vec<(String, f64)>,
}

/// Additive-error rank-`k` approximation from queries to a corrupted PSD
/// matrix.
pub fn robust_lra(raw: &dyn EntryAccess, cfg: &RobustConfig, seed: u64) -> Result<RobustRun> {
    cfg.validate()?;
    let cached = CachedSource::new(raw, cfg.symmetric_cache);
    let mut meter = StageMeter::start(&cached);
    let diag = cached.diagonal().stage("diagonal")?;
    meter.mark(&cached, "diagonal");
    run_on(&cached, diag, cfg, seed, meter)
}

/// Correlation-matrix variant: diagonal taken as 1 without reading it and
/// `φ_max = 1`.
pub fn correlation_lra(raw: &dyn EntryAccess, k: usize, eps: f64, eta: f64, seed: u64) -> Result<RobustRun> {
    correlation_lra_with(raw, &RobustConfig::new(k, eps, eta, 1.0), seed)
}

pub fn correlation_lra_with(raw: &dyn EntryAccess, cfg: &RobustConfig, seed: u64) -> Result<RobustRun> {
    let cfg = RobustConfig { phi_max: 1.0, ..*cfg };
    cfg.validate()?;
    let unit = UnitDiagonal { inner: raw };
    let cached = CachedSource::new(&unit, cfg.symmetric_cache);
    let mut meter = StageMeter::start(&cached);
    meter.mark(&cached, "diagonal");
    let diag = Vector::from_element(raw.n(), 1.0);
    run_on(&cached, diag, &cfg, seed, meter)
}

fn run_on(
    cached: &dyn EntryAccess,
    diag: Vector,
    cfg: &RobustConfig,
    seed: u64,
    mut meter: StageMeter,
) -> Result<RobustRun> {
    let n = cached.n();
    let k = cfg.k;
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let mut flags = Vec::new();
    let d: Vec<f64> = diag.iter().copied().collect();
    let truncated;
    let access: &dyn EntryAccess = if cfg.truncate {
        truncated = Truncated {
            inner: cached,
            rule: Truncation {
                phi_max: cfg.phi_max,
                diag: d.clone(),
            },
        };
        &truncated
    } else {
        cached
    };

    let mut t = cfg.pcp_size(n);
    if let Some(budget) = cfg.query_budget {
        let room = budget.saturating_sub(n as u64);
        let fit = (room as f64).sqrt().floor() as usize;
        if t > fit {
            t = fit.max(k);
            flags.push(format!("t reduced to {t} to fit the query budget; guarantee void"));
        }
    }

    let c = column_pcp_diagonal(&d, k, cfg.eps, cfg.eta, t, &mut stream(seed, streams::COLUMN_PCP))
        .stage("column_pcp")?;
    meter.mark(access, "column_pcp");
    let r_sketch = row_pcp_diagonal(&c, access, &d, k, cfg.eps, cfg.eta, t, &mut stream(seed, streams::ROW_PCP))
        .stage("row_pcp")?;
    meter.mark(access, "row_pcp");
    let r = r_sketch.sketch.as_ref().expect("row PCP is materialized");

    let v_tilde = estimate_frobenius(access, cfg.phi_max, cfg.frobenius_factor, &mut stream(seed, streams::FROBENIUS))
        .stage("frobenius")?;
    meter.mark(access, "frobenius");

    let mut fkv_rng = stream(seed, streams::FKV);
    let sample = fkv_row_sample(r, n, cfg, v_tilde, &mut fkv_rng).stage("fkv_sample")?;
    let kk = k.min(r.ncols());
    let (basis, padded) = fkv_lra(r, &sample.sampler, kk, &mut fkv_rng).stage("fkv_lra")?;
    if padded {
        flags.push("fkv: sampled rows rank deficient, basis padded".to_string());
    }
    meter.mark(access, "fkv");

    let u = lift_columns(access, &c, &basis, cfg, &mut stream(seed, streams::LIFT_COLUMNS), &mut flags)
        .stage("lift_columns")?;
    meter.mark(access, "lift_columns");
    let nf = lift_rows(access, &u, cfg, &mut stream(seed, streams::LIFT_ROWS)).stage("lift_rows")?;
    meter.mark(access, "lift_rows");

    let mut sizes = vec![
        ("k".to_string(), k as f64),
        ("eps".to_string(), cfg.eps),
        ("eta".to_string(), cfg.eta),
        ("t".to_string(), t as f64),
        ("r_rows".to_string(), r.nrows() as f64),
        ("r_cols".to_string(), r.ncols() as f64),
        ("tau".to_string(), sample.tau),
        ("heavy_rows".to_string(), sample.heavy as f64),
        ("uniform_rows".to_string(), sample.uniform as f64),
        ("lift_size".to_string(), cfg.lift_size() as f64),
    ];
    sizes.extend(cfg.constants());
    Ok(RobustRun {
        factors: LowRankFactors::new(u, nf)?,
        queries_total: meter.total(),
        stages: meter.into_stages(),
        v_tilde,
        t,
        r_shape: r.shape(),
        heavy_rows: sample.heavy,
        fkv_rows: sample.sampler.len(),
        flags,
        sizes,
    })
}

/// `X_C = (C E)(Vᵀ E)⁺` with `E` a leverage sample of the columns of `Vᵀ`,
/// returned as an orthonormal `n × k` basis of its columns.
fn lift_columns(
    access: &dyn EntryAccess,
    c: &PcpSketch,
    basis: &DenseMatrix,
    cfg: &RobustConfig,
    rng: &mut Rng,
    flags: &mut Vec<String>,
) -> Result<DenseMatrix> {
    let e = build_sampler(&row_norms_sq(basis), cfg.lift_size(), SamplerMode::WithReplacement, rng)?.dedup();
    let mut ce = c.column_block(access, e.indices())?;
    for (b, w) in e.weights().iter().enumerate() {
        ce.column_mut(b).scale_mut(*w);
    }
    let vte = e.select_rows(basis).transpose();
    let x_c = ce * linalg::pseudoinverse(&vte)?;
    let u = linalg::orthonormal_basis(&x_c);
    if u.ncols() < cfg.k {
        flags.push(format!("lift: column space has rank {} < k, padded", u.ncols()));
    }
    Ok(pad_basis(&u, cfg.k, rng))
}

/// `X_A = (E′U)⁺ E′A` with `E′` a leverage sample of the rows of `U`.
fn lift_rows(access: &dyn EntryAccess, u: &DenseMatrix, cfg: &RobustConfig, rng: &mut Rng) -> Result<DenseMatrix> {
    let e = build_sampler(&row_norms_sq(u), cfg.lift_size(), SamplerMode::WithReplacement, rng)?.dedup();
    let mut ea = access.rows(e.indices())?;
    for (a, w) in e.weights().iter().enumerate() {
        ea.row_mut(a).scale_mut(*w);
    }
    Ok(linalg::pseudoinverse(&e.select_rows(u))? * ea)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{InstanceSpec, QueryOracle};
    use crate::rng::gaussian_matrix;

    #[test]
    fn frobenius_of_identity_is_near_n() {
        let o = QueryOracle::new(DenseMatrix::identity(200, 200)).unwrap();
        for s in 0..20 {
            let v = estimate_frobenius(&o, 1.0, 16.0, &mut stream(s, 0)).unwrap();
            assert!((0.5..=2.0).contains(&(v / 200.0)), "{v}");
        }
    }

    #[test]
    fn frobenius_of_zero_is_zero() {
        let o = QueryOracle::new(DenseMatrix::zeros(30, 30)).unwrap();
        assert_eq!(estimate_frobenius(&o, 1.0, 16.0, &mut stream(1, 0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_r_uses_only_uniform_rows() {
        let r = DenseMatrix::zeros(40, 40);
        let cfg = RobustConfig::new(2, 0.3, 0.0, 1.0);
        let s = fkv_row_sample(&r, 100, &cfg, 0.0, &mut stream(2, 0)).unwrap();
        assert_eq!(s.heavy, 0);
        assert!(s.uniform > 0);
    }

    #[test]
    fn huge_row_is_always_selected() {
        let mut r = DenseMatrix::from_element(50, 50, 0.1);
        r.row_mut(7).fill(100.0);
        let cfg = RobustConfig::new(1, 0.3, 0.0, 1.0);
        let v = linalg::frobenius_sq(&r);
        let mut hits = 0;
        for seed in 0..20 {
            let s = fkv_row_sample(&r, 100, &cfg, v, &mut stream(seed, 0)).unwrap();
            assert!(s.tau * 10.0 <= 50.0 * 100.0 * 100.0);
            if s.estimates[7].passed_threshold && s.sampler.indices().contains(&7) {
                hits += 1;
            }
        }
        assert!(hits >= 18);
    }

    #[test]
    fn fkv_recovers_rank_k_when_all_rows_sampled() {
        let mut rng = stream(4, 0);
        let r = gaussian_matrix(30, 2, &mut rng) * gaussian_matrix(2, 25, &mut rng);
        let (v, padded) = fkv_lra(&r, &SamplingMatrix::identity(30), 2, &mut rng).unwrap();
        assert!(!padded);
        assert!(linalg::orthonormality_defect(&v) < 1e-10);
        assert!(linalg::frobenius_sq(&(&r - &r * &v * v.transpose())) < 1e-16 * linalg::frobenius_sq(&r));
    }

    #[test]
    fn fkv_pads_rank_deficient_sample() {
        let r = DenseMatrix::zeros(10, 10);
        let (v, padded) = fkv_lra(&r, &SamplingMatrix::identity(10), 3, &mut stream(5, 0)).unwrap();
        assert!(padded);
        assert_eq!(v.ncols(), 3);
        assert!(linalg::orthonormality_defect(&v) < 1e-10);
    }

    #[test]
    fn stage_counts_sum_to_oracle_delta() {
        let inst = InstanceSpec::robust_nu(300, 0.3, 0.05, 1, 6).generate().unwrap();
        let cfg = RobustConfig::new(1, 0.3, 0.05, inst.meta.phi_max);
        let run = robust_lra(&inst.oracle, &cfg, 9).unwrap();
        assert_eq!(run.stages.iter().map(|s| s.1).sum::<u64>(), run.queries_total);
        assert_eq!(run.queries_total, inst.oracle.queries());
        assert_eq!(run.factors.m.shape(), (300, 1));
    }

    #[test]
    fn budget_shrinks_t_and_flags() {
        let inst = InstanceSpec::robust_nu(300, 0.3, 0.05, 1, 6).generate().unwrap();
        let mut cfg = RobustConfig::new(1, 0.3, 0.05, inst.meta.phi_max);
        cfg.query_budget = Some(2_000);
        let run = robust_lra(&inst.oracle, &cfg, 9).unwrap();
        assert!(run.t * run.t + 300 <= 2_000);
        assert!(run.flags.iter().any(|f| f.contains("budget")));
    }

    #[test]
    fn correlation_ignores_the_diagonal() {
        let clean = InstanceSpec::correlation(200, 2, 0.2, 0.0, crate::oracle::Corruption::None, 3)
            .generate()
            .unwrap();
        let mut bumped = clean.oracle.ground_truth().clone();
        for i in 0..200 {
            bumped[(i, i)] += 3.0;
        }
        let o2 = QueryOracle::new(bumped).unwrap();
        let a = correlation_lra(&clean.oracle, 2, 0.3, 0.0, 5).unwrap();
        let b = correlation_lra(&o2, 2, 0.3, 0.0, 5).unwrap();
        assert_eq!(a.factors, b.factors);
        assert_eq!(a.queries_total, b.queries_total);
    }
}
