use super::{generalized_lra, LowRankFactors};
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::oracle::EntryAccess;
use rand::Rng as _;

use crate::rng::Rng;
use crate::sampling::SamplingMatrix;
use crate::scores::{build_sampler, row_norms_sq, SamplerMode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    /// `S` and `T` each draw `⌈sample_factor · k′/ε²⌉` rows of `Q`.
    pub sample_factor: f64,
    /// The final regression reads `⌈regression_factor · k·(max(ln k, 1) + 1/ε)⌉` rows.
    pub regression_factor: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            sample_factor: 0.5,
            regression_factor: 3.0,
        }
    }
}

impl ProjectionConfig {
    pub fn sketch_size(&self, k_prime: usize, eps: f64) -> usize {
        ((self.sample_factor * k_prime as f64) / (eps * eps)).ceil().max(1.0) as usize
    }

    pub fn regression_size(&self, k: usize, eps: f64) -> usize {
        let k_f = k as f64;
        (self.regression_factor * k_f * (k_f.ln().max(1.0) + 1.0 / eps))
            .ceil()
            .max(1.0) as usize
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionRun {
    pub factors: LowRankFactors,
    /// Queries spent reading `S·A·T`.
    pub sketch_queries: u64,
    /// Queries spent reading rows of `A` for the final regression.
    pub regression_queries: u64,
    /// Distinct rows and columns of `S·A·T`.
    pub sketch_shape: (usize, usize),
    /// Distinct rows read by the regression.
    pub regression_rows: usize,
}

/// Keeps row `i` with probability `min(1, t·lev_i/Σlev)`: about `t` rows,
/// and rows that with-replacement sampling would repeat are taken once at
/// weight 1.
fn independent_sample(lev: &[f64], t: usize, rng: &mut Rng) -> Result<SamplingMatrix> {
    let total: f64 = lev.iter().sum();
    build_sampler(lev, t, SamplerMode::Independent { oversample: t as f64 / total }, rng)
}

fn regression_sample(lev: &[f64], r: usize, known: &[usize], rng: &mut Rng) -> Result<SamplingMatrix> {
    let n = lev.len();
    let total: f64 = lev.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("leverage scores are all zero"));
    }
    let mut forced = vec![false; n];
    for &i in known {
        if i >= n {
            return Err(Error::invalid(format!("known row {i} out of range")));
        }
        forced[i] = true;
    }
    let scale = r as f64 / total;
    let mut indices = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let p = if forced[i] { 1.0 } else { (lev[i] * scale).min(1.0) };
        if p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p) {
            indices.push(i);
            weights.push(1.0 / p.sqrt());
        }
    }
    SamplingMatrix::new(n, indices, weights)
}

fn sketch_sat(
    access: &dyn EntryAccess,
    q: &DenseMatrix,
    t: usize,
    rng: &mut Rng,
) -> Result<(SamplingMatrix, SamplingMatrix, DenseMatrix)> {
    let lev = row_norms_sq(q);
    let s = independent_sample(&lev, t, rng)?;
    let tt = independent_sample(&lev, t, rng)?;
    let mut sat = access.submatrix(s.indices(), tt.indices())?;
    for (a, w) in s.weights().iter().enumerate() {
        sat.row_mut(a).scale_mut(*w);
    }
    for (b, w) in tt.weights().iter().enumerate() {
        sat.column_mut(b).scale_mut(*w);
    }
    Ok((s, tt, sat))
}

fn check(access: &dyn EntryAccess, q: &DenseMatrix, k: usize, eps: f64) -> Result<()> {
    if q.nrows() != access.n() {
        return Err(Error::invalid("Q must have one row per index of A"));
    }
    if k == 0 || k > q.ncols() {
        return Err(Error::invalid(format!(
            "k = {k} must lie in 1..={} (columns of Q)",
            q.ncols()
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps must lie in (0, 1)"));
    }
    Ok(())
}

/// Turns a structured projection `Q` into rank-`k` factors `(M, N)`:
/// sketch both sides by the leverage scores of `Q`, solve the small
/// generalized LRA, lift its column space through `Q`, then fit `N` by a
/// leverage-sampled regression on rows of `A`.
pub fn projection_to_lra(
    access: &dyn EntryAccess,
    q: &DenseMatrix,
    k: usize,
    eps: f64,
    cfg: &ProjectionConfig,
    rng: &mut Rng,
) -> Result<ProjectionRun> {
    projection_to_lra_with_known(access, q, k, eps, cfg, &[], rng)
}

/// As [`projection_to_lra`], where the rows `known` of `A` have already been
/// read in full. They enter the final regression with probability one; the
/// other rows are kept independently with probability
/// `min(1, r·‖M_i‖²/k)`, so the sketch stays unbiased.
pub fn projection_to_lra_with_known(
    access: &dyn EntryAccess,
    q: &DenseMatrix,
    k: usize,
    eps: f64,
    cfg: &ProjectionConfig,
    known: &[usize],
    rng: &mut Rng,
) -> Result<ProjectionRun> {
    check(access, q, k, eps)?;
    let t = cfg.sketch_size(q.ncols(), eps);
    let before = access.queries();
    let (s, tt, sat) = sketch_sat(access, q, t, rng)?;
    let mid = access.queries();

    let sq = s.select_rows(q);
    let qt = tt.select_rows(q).transpose();
    let x_star = generalized_lra(&sat, &sq, &qt, k)?;
    let ux = linalg::svd(&x_star)?.left_vectors(k);
    let mut m = linalg::orthonormal_basis(&(q * ux));
    if m.ncols() == 0 {
        // X* vanished; any k directions of Q are as good as none
        m = q.columns(0, k).into_owned();
    }

    let r = cfg.regression_size(k, eps);
    let w = regression_sample(&row_norms_sq(&m), r, known, rng)?;
    let mut wa = access.rows(w.indices())?;
    for (a, wt) in w.weights().iter().enumerate() {
        wa.row_mut(a).scale_mut(*wt);
    }
    let wm = w.select_rows(&m);
    let n = linalg::pseudoinverse(&wm)? * wa;
    let after = access.queries();
    Ok(ProjectionRun {
        factors: LowRankFactors::new(m, n)?,
        sketch_queries: mid - before,
        regression_queries: after - mid,
        sketch_shape: (s.len(), tt.len()),
        regression_rows: w.len(),
    })
}

/// PSD-output variant: `X̂ = (SQ)⁺ P_{SQ} SAT P_{QᵀT} (QᵀT)⁺`, symmetrized and
/// cut to its top-`k` positive eigenvalues, gives `M = Q (X*)^{1/2}`.
pub fn projection_to_psd(
    access: &dyn EntryAccess,
    q: &DenseMatrix,
    k: usize,
    eps: f64,
    cfg: &ProjectionConfig,
    rng: &mut Rng,
) -> Result<ProjectionRun> {
    check(access, q, k, eps)?;
    let t = cfg.sketch_size(q.ncols(), eps);
    let before = access.queries();
    let (s, tt, sat) = sketch_sat(access, q, t, rng)?;
    let spent = access.queries() - before;

    let sq = s.select_rows(q);
    let qt = tt.select_rows(q).transpose();
    // B⁺ P_B = B⁺ and P_C C⁺ = C⁺, so the projections drop out
    let x_hat = linalg::pseudoinverse(&sq)? * &sat * linalg::pseudoinverse(&qt)?;
    let sym = (&x_hat + x_hat.transpose()) * 0.5;
    let e = linalg::sym_eigen(&sym)?;
    let keep: Vec<usize> = (0..e.values.len())
        .filter(|&j| e.values[j] > 0.0)
        .take(k)
        .collect();
    let mut root = DenseMatrix::zeros(q.ncols(), keep.len());
    for (c, &j) in keep.iter().enumerate() {
        root.set_column(c, &(e.vectors.column(j) * e.values[j].sqrt()));
    }
    let m = if keep.is_empty() {
        DenseMatrix::zeros(q.nrows(), 0)
    } else {
        q * root
    };
    Ok(ProjectionRun {
        factors: LowRankFactors::psd(m),
        sketch_queries: spent,
        regression_queries: 0,
        sketch_shape: (s.len(), tt.len()),
        regression_rows: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{CachedSource, InstanceSpec, QueryOracle};
    use crate::rng::{gaussian_matrix, stream};

    #[test]
    fn exact_rank_k_is_recovered() {
        let mut rng = stream(1, 0);
        let g = gaussian_matrix(80, 3, &mut rng);
        let a = &g * g.transpose();
        let q = linalg::orthonormal_basis(&g);
        let o = QueryOracle::new(a.clone()).unwrap();
        let run = projection_to_lra(&o, &q, 3, 0.5, &ProjectionConfig::default(), &mut rng).unwrap();
        assert!(run.factors.error_sq(&a).sqrt() < 1e-8 * linalg::frobenius_sq(&a).sqrt());
        let psd = projection_to_psd(&o, &q, 3, 0.5, &ProjectionConfig::default(), &mut rng).unwrap();
        assert!(psd.factors.error_sq(&a).sqrt() < 1e-8 * linalg::frobenius_sq(&a).sqrt());
    }

    #[test]
    fn query_accounting_matches_counter() {
        let inst = InstanceSpec::random_psd(150, 2, 0.2, 2).generate().unwrap();
        let o = &inst.oracle;
        let q = linalg::svd(o.ground_truth()).unwrap().left_vectors(8);
        let c = CachedSource::new(o, true);
        let run = projection_to_lra(&c, &q, 2, 0.5, &ProjectionConfig::default(), &mut stream(3, 0)).unwrap();
        assert_eq!(run.sketch_queries + run.regression_queries, o.queries());
    }

    #[test]
    fn k_above_q_width_is_rejected() {
        let o = QueryOracle::new(DenseMatrix::identity(10, 10)).unwrap();
        let q = DenseMatrix::identity(10, 2);
        assert!(projection_to_lra(&o, &q, 3, 0.5, &ProjectionConfig::default(), &mut stream(4, 0)).is_err());
    }
}
