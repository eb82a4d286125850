//! Projection-cost preserving sketches.
//!
//! A column PCP `C = A·Sᵀ` keeps only its sampler until a consumer asks for
//! particular columns; a row PCP `R = S_r·A·S_cᵀ` is always read in full.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::oracle::EntryAccess;
use crate::rng::{gaussian_matrix, Rng};
use crate::sampling::SamplingMatrix;
use crate::scores::{build_sampler, SamplerMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Column,
    Row,
}

/// Which envelope a sketch promises over rank-`k` projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guarantee {
    /// `‖C − XC‖_F² = (1 ± ε)‖A − XA‖_F²`.
    FrobeniusRelative,
    /// `‖R − RX‖₂² = (1 ± ε)‖C − CX‖₂² ± (ε/k)‖A − A_k‖_F²`.
    SpectralFrobenius,
    /// `‖C − XC‖_F² = ‖A − XA‖_F² ± (ε + √η)‖A‖_F²`.
    AdditiveRobust,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcpParams {
    pub k: usize,
    pub eps: f64,
    /// Requested number of draws.
    pub t: usize,
    /// Corruption level the additive envelope allows for.
    pub eta: f64,
}

#[derive(Debug, Clone)]
pub struct PcpSketch {
    pub axis: Axis,
    pub guarantee: Guarantee,
    pub params: PcpParams,
    /// Column sampler (duplicates merged).
    pub columns: SamplingMatrix,
    /// Row sampler of a row PCP (duplicates merged).
    pub rows: Option<SamplingMatrix>,
    /// Materialized entries; `None` for a lazy column PCP.
    pub sketch: Option<DenseMatrix>,
    pub queries_spent: u64,
}

impl PcpSketch {
    /// Sampler along the sketch's own axis.
    pub fn sampler(&self) -> &SamplingMatrix {
        match self.axis {
            Axis::Column => &self.columns,
            Axis::Row => self.rows.as_ref().expect("row PCP carries a row sampler"),
        }
    }

    /// Number of distinct columns of `C`.
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    /// Columns `positions` of `C = A·Sᵀ`, scaled, read through `access`.
    pub fn column_block(&self, access: &dyn EntryAccess, positions: &[usize]) -> Result<DenseMatrix> {
        let idx: Vec<usize> = positions.iter().map(|&p| self.columns.indices()[p]).collect();
        let mut block = access.columns(&idx)?;
        for (b, &p) in positions.iter().enumerate() {
            block.column_mut(b).scale_mut(self.columns.weights()[p]);
        }
        Ok(block)
    }

    /// All of `C`. Costs `n · width()` queries.
    pub fn materialize(&self, access: &dyn EntryAccess) -> Result<DenseMatrix> {
        let all: Vec<usize> = (0..self.width()).collect();
        self.column_block(access, &all)
    }

    pub fn matrix(&self) -> Option<&DenseMatrix> {
        self.sketch.as_ref()
    }
}

/// `⌈c·√(nk)·ln n/ε²⌉`, the ridge-score PCP size.
pub fn ridge_pcp_size(n: usize, k: usize, eps: f64, c: f64) -> usize {
    let n_f = n as f64;
    ((c * (n_f * k as f64).sqrt() * n_f.ln().max(1.0)) / (eps * eps)).ceil().max(1.0) as usize
}

/// `⌈c·φ_max·√n·k²·ln n/ε²⌉`, the diagonal-sampling PCP size.
pub fn diagonal_pcp_size(n: usize, k: usize, eps: f64, phi_max: f64, c: f64) -> usize {
    let n_f = n as f64;
    let k_f = k as f64;
    ((c * phi_max * n_f.sqrt() * k_f * k_f * n_f.ln().max(1.0)) / (eps * eps))
        .ceil()
        .max(1.0) as usize
}

/// Lazy column PCP sampled with probabilities proportional to `scores`
/// (approximate ridge scores of `A^{1/2}`). Reads nothing.
pub fn column_pcp_ridge(
    n: usize,
    scores: &[f64],
    k: usize,
    eps: f64,
    t: usize,
    rng: &mut Rng,
) -> Result<PcpSketch> {
    check_len(scores, n)?;
    let columns = build_sampler(scores, t, SamplerMode::WithReplacement, rng)?.dedup();
    Ok(PcpSketch {
        axis: Axis::Column,
        guarantee: Guarantee::FrobeniusRelative,
        params: PcpParams { k, eps, t, eta: 0.0 },
        columns,
        rows: None,
        sketch: None,
        queries_spent: 0,
    })
}

/// Row PCP of a lazy column PCP: `t` rows drawn from the same distribution,
/// then the `t_r × t_c` intersection read in full.
pub fn row_pcp_ridge(
    c: &PcpSketch,
    access: &dyn EntryAccess,
    scores: &[f64],
    k: usize,
    eps: f64,
    t: usize,
    rng: &mut Rng,
) -> Result<PcpSketch> {
    row_pcp(c, access, scores, PcpParams { k, eps, t, eta: 0.0 }, Guarantee::SpectralFrobenius, rng)
}

/// Lazy column PCP sampled proportionally to the (observed) diagonal.
pub fn column_pcp_diagonal(
    diag: &[f64],
    k: usize,
    eps: f64,
    eta: f64,
    t: usize,
    rng: &mut Rng,
) -> Result<PcpSketch> {
    let weights = diagonal_weights(diag)?;
    let columns = build_sampler(&weights, t, SamplerMode::WithReplacement, rng)?.dedup();
    Ok(PcpSketch {
        axis: Axis::Column,
        guarantee: Guarantee::AdditiveRobust,
        params: PcpParams { k, eps, t, eta },
        columns,
        rows: None,
        sketch: None,
        queries_spent: 0,
    })
}

/// Row PCP of a diagonal column PCP, rows drawn proportionally to the diagonal.
pub fn row_pcp_diagonal(
    c: &PcpSketch,
    access: &dyn EntryAccess,
    diag: &[f64],
    k: usize,
    eps: f64,
    eta: f64,
    t: usize,
    rng: &mut Rng,
) -> Result<PcpSketch> {
    let weights = diagonal_weights(diag)?;
    row_pcp(c, access, &weights, PcpParams { k, eps, t, eta }, Guarantee::AdditiveRobust, rng)
}

fn diagonal_weights(diag: &[f64]) -> Result<Vec<f64>> {
    let w: Vec<f64> = diag.iter().map(|d| d.abs()).collect();
    if !(w.iter().sum::<f64>() > 0.0) {
        return Err(Error::invalid("diagonal has zero trace"));
    }
    Ok(w)
}

fn row_pcp(
    c: &PcpSketch,
    access: &dyn EntryAccess,
    weights: &[f64],
    params: PcpParams,
    guarantee: Guarantee,
    rng: &mut Rng,
) -> Result<PcpSketch> {
    if c.axis != Axis::Column {
        return Err(Error::invalid("row PCP needs a column PCP as input"));
    }
    check_len(weights, access.n())?;
    let rows = build_sampler(weights, params.t, SamplerMode::WithReplacement, rng)?.dedup();
    let before = access.queries();
    let raw = access.submatrix(rows.indices(), c.columns.indices())?;
    let spent = access.queries() - before;
    let mut r = raw;
    for (a, w) in rows.weights().iter().enumerate() {
        r.row_mut(a).scale_mut(*w);
    }
    for (b, w) in c.columns.weights().iter().enumerate() {
        r.column_mut(b).scale_mut(*w);
    }
    Ok(PcpSketch {
        axis: Axis::Row,
        guarantee,
        params,
        columns: c.columns.clone(),
        rows: Some(rows),
        sketch: Some(r),
        queries_spent: spent,
    })
}

fn check_len(v: &[f64], n: usize) -> Result<()> {
    if v.len() == n {
        Ok(())
    } else {
        Err(Error::invalid(format!("expected {n} weights, got {}", v.len())))
    }
}

/// Outcome of [`verify_pcp`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcpReport {
    /// Projections checked (random draws plus the top-`k` projector).
    pub checked: usize,
    pub violations: usize,
    /// Largest `(|sketch cost − true cost| − allowed) / scale` over all
    /// projections; nonpositive when every check passed.
    pub max_violation: f64,
    /// Largest `|sketch cost − true cost| / true cost`.
    pub worst_relative: f64,
    /// Largest `|sketch cost − true cost| / ‖A‖_F²`.
    pub worst_additive: f64,
}

impl PcpReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Certifies a sketch's declared envelope on `trials` random rank-`k`
/// projections plus the top-`k` projector of the reference matrix.
///
/// `observed` is the matrix the sampler was applied to (truncation
/// included); `truth` is the clean matrix the envelope is stated against.
pub fn verify_pcp(
    sketch: &PcpSketch,
    observed: &DenseMatrix,
    truth: &DenseMatrix,
    trials: usize,
    rng: &mut Rng,
) -> Result<PcpReport> {
    let k = sketch.params.k;
    let eps = sketch.params.eps;
    let a_frob = linalg::frobenius_sq(truth);
    let c_obs = sketch.columns.select_cols(observed);
    let mut report = PcpReport {
        checked: 0,
        violations: 0,
        max_violation: f64::NEG_INFINITY,
        worst_relative: 0.0,
        worst_additive: 0.0,
    };
    let mut record = |sk: f64, tr: f64, allowed: f64, scale: f64| {
        let diff = (sk - tr).abs();
        report.checked += 1;
        if diff > allowed + 1e-9 * scale.max(1.0) {
            report.violations += 1;
        }
        let denom = if scale > 0.0 { scale } else { 1.0 };
        report.max_violation = report.max_violation.max((diff - allowed) / denom);
        if tr > 0.0 {
            report.worst_relative = report.worst_relative.max(diff / tr);
        }
        if a_frob > 0.0 {
            report.worst_additive = report.worst_additive.max(diff / a_frob);
        }
    };
    match (sketch.axis, sketch.guarantee) {
        (Axis::Column, g) => {
            // left projections X = QQᵀ in ℝⁿ
            let n = truth.nrows();
            let mut projectors = random_bases(n, k, trials, rng);
            projectors.push(top_left(truth, k)?);
            let c_frob = linalg::frobenius_sq(&c_obs);
            for q in &projectors {
                let sk = c_frob - linalg::frobenius_sq(&(q.transpose() * &c_obs));
                let tr = a_frob - linalg::frobenius_sq(&(q.transpose() * truth));
                let allowed = match g {
                    Guarantee::AdditiveRobust => (eps + sketch.params.eta.sqrt()) * a_frob,
                    _ => eps * tr,
                };
                record(sk, tr, allowed, tr.max(a_frob * 1e-12));
            }
        }
        (Axis::Row, g) => {
            // right projections X = QQᵀ in ℝ^{t_c}
            let r = sketch
                .sketch
                .as_ref()
                .ok_or_else(|| Error::invalid("row PCP is not materialized"))?;
            let tc = c_obs.ncols();
            let mut projectors = random_bases(tc, k.min(tc), trials, rng);
            projectors.push(linalg::top_right_singular_vectors(&c_obs, k.min(tc))?);
            let tail = linalg::svd(truth)?.tail_energy(k);
            for q in &projectors {
                let r_res = r - (r * q) * q.transpose();
                let c_res = &c_obs - (&c_obs * q) * q.transpose();
                match g {
                    Guarantee::SpectralFrobenius => {
                        let sk = linalg::spectral_norm_sq(&r_res);
                        let tr = linalg::spectral_norm_sq(&c_res);
                        let allowed = eps * tr + eps / k as f64 * tail;
                        record(sk, tr, allowed, tr + tail / k as f64);
                    }
                    _ => {
                        let sk = linalg::frobenius_sq(&r_res);
                        let tr = linalg::frobenius_sq(&c_res);
                        let allowed = (eps + sketch.params.eta.sqrt()) * a_frob;
                        record(sk, tr, allowed, a_frob);
                    }
                }
            }
        }
    }
    Ok(report)
}

fn random_bases(dim: usize, k: usize, count: usize, rng: &mut Rng) -> Vec<DenseMatrix> {
    (0..count)
        .map(|_| linalg::orthonormal_basis(&gaussian_matrix(dim, k, rng)))
        .collect()
}

fn top_left(a: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let s = linalg::svd(a)?;
    Ok(s.left_vectors(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{InstanceSpec, QueryOracle};
    use crate::rng::stream;
    use crate::scores::ridge_sqrt_exact;

    #[test]
    fn row_materialization_costs_t_squared() {
        let inst = InstanceSpec::random_psd(200, 3, 0.2, 1).generate().unwrap();
        let o = &inst.oracle;
        let mut rng = stream(1, 0);
        let scores = vec![1.0; 200];
        let c = column_pcp_ridge(200, &scores, 3, 0.5, 40, &mut rng).unwrap();
        assert_eq!(o.queries(), 0);
        let r = row_pcp_ridge(&c, o, &scores, 3, 0.5, 40, &mut rng).unwrap();
        let (tr, tc) = (r.rows.as_ref().unwrap().len(), r.columns.len());
        assert_eq!(o.queries() as usize, tr * tc);
        assert_eq!(r.queries_spent as usize, tr * tc);
        let expect = r.rows.as_ref().unwrap().select_rows(&c.columns.select_cols(o.ground_truth()));
        assert!((r.sketch.unwrap() - expect).amax() < 1e-12);
    }

    #[test]
    fn identity_projection_costs_zero() {
        let a = InstanceSpec::random_psd(60, 2, 0.2, 2).generate().unwrap();
        let truth = a.oracle.ground_truth();
        let c = column_pcp_ridge(60, &vec![1.0; 60], 2, 0.5, 30, &mut stream(2, 0)).unwrap();
        let cm = c.columns.select_cols(truth);
        let i = DenseMatrix::identity(60, 60);
        assert!(linalg::frobenius_sq(&(&cm - &i * &cm)) < 1e-20);
    }

    #[test]
    fn column_pcp_frobenius_ratio() {
        let inst = InstanceSpec::random_psd(300, 3, 0.3, 3).generate().unwrap();
        let truth = inst.oracle.ground_truth();
        let scores = ridge_sqrt_exact(truth, 3).unwrap().values;
        let a = linalg::frobenius_sq(truth);
        for seed in 0..20 {
            let c = column_pcp_ridge(300, &scores, 3, 0.5, 60, &mut stream(seed, 0)).unwrap();
            let ratio = linalg::frobenius_sq(&c.columns.select_cols(truth)) / a;
            assert!((0.5..=2.0).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn correlation_diagonal_gives_uniform_sampling() {
        let w = diagonal_weights(&[1.0; 5]).unwrap();
        assert!(w.iter().all(|x| *x == 1.0));
        assert!(column_pcp_diagonal(&[0.0; 4], 1, 0.5, 0.0, 3, &mut stream(1, 0)).is_err());
    }

    #[test]
    fn diagonal_only_matrix_cost_identity() {
        let d = DenseMatrix::from_diagonal(&crate::linalg::Vector::from_vec(vec![1.0, 2.0, 3.0, 4.0]));
        let o = QueryOracle::new(d.clone()).unwrap();
        let diag: Vec<f64> = o.diagonal().unwrap().iter().copied().collect();
        let c = column_pcp_diagonal(&diag, 1, 0.5, 0.0, 4000, &mut stream(4, 0)).unwrap();
        let cm = c.columns.select_cols(&d);
        for j in 0..cm.ncols() {
            assert_eq!(cm.column(j).iter().filter(|x| **x != 0.0).count(), 1);
        }
        let rep = verify_pcp(&c, &d, &d, 10, &mut stream(5, 0)).unwrap();
        assert!(rep.worst_additive < 0.2);
    }

    #[test]
    fn verify_reports_zero_violations_for_full_sketch() {
        let inst = InstanceSpec::random_psd(40, 2, 0.2, 5).generate().unwrap();
        let truth = inst.oracle.ground_truth().clone();
        let c = PcpSketch {
            axis: Axis::Column,
            guarantee: Guarantee::FrobeniusRelative,
            params: PcpParams { k: 2, eps: 1e-6, t: 40, eta: 0.0 },
            columns: SamplingMatrix::identity(40),
            rows: None,
            sketch: None,
            queries_spent: 0,
        };
        let rep = verify_pcp(&c, &truth, &truth, 20, &mut stream(6, 0)).unwrap();
        assert!(rep.passed());
        assert_eq!(rep.checked, 21);
    }
}
