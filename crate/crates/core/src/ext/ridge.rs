use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::lra::{sample_optimal_lra, LowRankFactors, PipelineConfig};
use crate::oracle::EntryAccess;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeProblem {
    pub lambda: f64,
    /// Upper bound on the statistical dimension `s_λ`.
    pub s_hat: f64,
    pub eps: f64,
    /// Accuracy handed to the inner low-rank pipeline.
    pub inner_eps: f64,
}

impl RidgeProblem {
    pub fn new(lambda: f64, s_hat: f64, eps: f64) -> Self {
        RidgeProblem {
            lambda,
            s_hat,
            eps,
            inner_eps: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("lambda must be nonnegative"));
        }
        if !(self.s_hat >= 1.0) {
            return Err(Error::invalid("s_hat must be at least 1"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.inner_eps > 0.0 && self.inner_eps < 1.0) {
            return Err(Error::invalid("eps must lie in (0, 1)"));
        }
        Ok(())
    }

    /// `⌈ŝ/ε²⌉`.
    pub fn rank(&self) -> usize {
        (self.s_hat / (self.eps * self.eps) - 1e-9).ceil().max(1.0) as usize
    }
}

/// A low-rank stand-in `B` for `A`, kept as a thin SVD `U Σ Vᵀ` so any
/// right-hand side can be solved without touching `A` again.
#[derive(Debug, Clone)]
pub struct RidgeCoreset {
    pub factors: LowRankFactors,
    pub k: usize,
    /// `k ≥ n`: `A` was read in full and `B = A`.
    pub degenerate: bool,
    pub queries: u64,
    pub stages: Vec<(String, u64)>,
    u: DenseMatrix,
    sigma: Vector,
    v: DenseMatrix,
}

impl RidgeCoreset {
    fn from_factors(factors: LowRankFactors, k: usize, degenerate: bool, queries: u64, stages: Vec<(String, u64)>) -> Result<Self> {
        // B = M N = Q_m (R_m N); the SVD of the small R_m N finishes it
        let qr = factors.m.clone().qr();
        let (q_m, r_m) = (qr.q(), qr.r());
        let svd = linalg::svd(&(r_m * &factors.n))?;
        let r = svd.rank(linalg::Tolerances::DEFAULT.rel_cutoff);
        Ok(RidgeCoreset {
            u: q_m * svd.left_vectors(r),
            sigma: svd.singular_values.rows(0, r).into_owned(),
            v: svd.right_vectors(r),
            factors,
            k,
            degenerate,
            queries,
            stages,
        })
    }

    /// `‖A − B‖₂²`, for certification against a known `A`.
    pub fn spectral_error_sq(&self, a: &DenseMatrix) -> f64 {
        linalg::spectral_norm_sq(&(a - self.factors.reconstruct()))
    }
}

/// Builds the coreset for `problem` from entry queries to the PSD `A`.
pub fn ridge_coreset(
    access: &dyn EntryAccess,
    problem: &RidgeProblem,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<RidgeCoreset> {
    problem.validate()?;
    let n = access.n();
    let k = problem.rank();
    let before = access.queries();
    if k >= n {
        let all: Vec<usize> = (0..n).collect();
        let a = access.submatrix(&all, &all)?;
        let spent = access.queries() - before;
        let factors = LowRankFactors::new(a, DenseMatrix::identity(n, n))?;
        return RidgeCoreset::from_factors(factors, n, true, spent, vec![("full_read".into(), spent)]);
    }
    let run = sample_optimal_lra(access, k, problem.inner_eps, cfg, seed)?;
    RidgeCoreset::from_factors(run.factors, k, false, run.queries_total, run.stages)
}

/// `argmin_x ‖Bx − y‖² + λ‖x‖²` for the coreset's `B`. The component of `x`
/// outside the row space of `B` is shrunk to zero.
pub fn ridge_solve(coreset: &RidgeCoreset, y: &Vector, lambda: f64) -> Result<Vector> {
    if y.len() != coreset.u.nrows() {
        return Err(Error::invalid("right-hand side has the wrong length"));
    }
    let uty = coreset.u.transpose() * y;
    let shrunk = Vector::from_fn(uty.len(), |i, _| {
        let s = coreset.sigma[i];
        let d = s * s + lambda;
        if d > 0.0 {
            s / d * uty[i]
        } else {
            0.0
        }
    });
    Ok(&coreset.v * shrunk)
}

/// `‖Ax − y‖² + λ‖x‖²`.
pub fn ridge_objective(a: &DenseMatrix, x: &Vector, y: &Vector, lambda: f64) -> f64 {
    (a * x - y).norm_squared() + lambda * x.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{InstanceSpec, QueryOracle};
    use crate::rng::{gaussian_matrix, stream};

    fn dense_ridge(a: &DenseMatrix, y: &Vector, lambda: f64) -> Vector {
        let n = a.nrows();
        let lhs = a.transpose() * a + DenseMatrix::identity(n, n) * lambda;
        lhs.lu().solve(&(a.transpose() * y)).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let o = QueryOracle::new(DenseMatrix::identity(20, 20) * 2.0).unwrap();
        let c = ridge_coreset(&o, &RidgeProblem::new(1.0, 1.0, 0.5), &PipelineConfig::default(), 1).unwrap();
        let x = ridge_solve(&c, &Vector::zeros(20), 1.0).unwrap();
        assert_eq!(x.norm(), 0.0);
    }

    #[test]
    fn degenerate_path_matches_dense_solve() {
        let g = gaussian_matrix(30, 30, &mut stream(2, 0));
        let a = &g * g.transpose();
        let o = QueryOracle::new(a.clone()).unwrap();
        let p = RidgeProblem::new(0.7, 30.0, 0.5);
        let c = ridge_coreset(&o, &p, &PipelineConfig::default(), 3).unwrap();
        assert!(c.degenerate);
        let y = Vector::from_iterator(30, gaussian_matrix(30, 1, &mut stream(3, 0)).iter().copied());
        let x = ridge_solve(&c, &y, 0.7).unwrap();
        let x_star = dense_ridge(&a, &y, 0.7);
        assert!((x - &x_star).norm() <= 1e-8 * x_star.norm().max(1.0));
    }

    #[test]
    fn solving_does_not_query() {
        let inst = InstanceSpec::random_psd(200, 3, 0.1, 4).generate().unwrap();
        let p = RidgeProblem::new(50.0, 3.0, 0.6);
        let c = ridge_coreset(&inst.oracle, &p, &PipelineConfig::default(), 5).unwrap();
        let frozen = inst.oracle.queries();
        assert_eq!(frozen, c.queries);
        for s in 0..10 {
            let y = Vector::from_iterator(200, gaussian_matrix(200, 1, &mut stream(s, 1)).iter().copied());
            ridge_solve(&c, &y, 50.0).unwrap();
        }
        assert_eq!(inst.oracle.queries(), frozen);
    }

    #[test]
    fn rank_is_s_over_eps_squared() {
        assert_eq!(RidgeProblem::new(1.0, 2.0, 0.5).rank(), 8);
        assert_eq!(RidgeProblem::new(1.0, 1.0, 0.1).rank(), 100);
    }
}
