//! Slow exact answers for tests and evaluation. Everything here reads the
//! ground truth directly and costs no queries.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::rng::Rng;
use crate::scores::{build_sampler, row_norms_sq, SamplerMode};

/// `‖A − A_k‖_F²` from a full SVD.
pub fn exact_lra_error(a: &DenseMatrix, k: usize) -> Result<f64> {
    Ok(linalg::svd(a)?.tail_energy(k))
}

/// FKV with true row norms: `s` rows drawn with probability
/// `‖A_i‖²/‖A‖_F²`, rescaled; returns the top-`k` right singular vectors of
/// the sample (`n × k`, orthonormal). A zero matrix gives the first `k`
/// coordinate vectors.
pub fn fkv_reference(a: &DenseMatrix, k: usize, s: usize, rng: &mut Rng) -> Result<DenseMatrix> {
    let n = a.ncols();
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds {n} columns")));
    }
    let norms = row_norms_sq(a);
    if !(norms.iter().sum::<f64>() > 0.0) {
        return Ok(DenseMatrix::identity(n, k));
    }
    let sampler = build_sampler(&norms, s, SamplerMode::WithReplacement, rng)?;
    let sampled = sampler.select_rows(a);
    let v = linalg::svd(&sampled)?.right_vectors(k.min(sampled.nrows()));
    Ok(crate::lra::pad_basis(&v, k, rng))
}

/// `s_λ = Σ σ_i²/(σ_i² + λ)`.
pub fn exact_statdim(a: &DenseMatrix, lambda: f64) -> Result<f64> {
    let svd = linalg::svd(a)?;
    let top = svd.singular_values.get(0).copied().unwrap_or(0.0);
    Ok(svd
        .singular_values
        .iter()
        .filter(|&&s| s > linalg::Tolerances::DEFAULT.rel_cutoff * top)
        .map(|s| s * s / (s * s + lambda))
        .sum())
}

/// `x* = (AᵀA + λI)⁻¹Aᵀy`; for `λ = 0` the minimum-norm least-squares
/// solution.
pub fn dense_ridge_solve(a: &DenseMatrix, y: &Vector, lambda: f64) -> Result<Vector> {
    if y.len() != a.nrows() {
        return Err(Error::invalid("right-hand side has the wrong length"));
    }
    if lambda > 0.0 {
        let n = a.ncols();
        let lhs = a.transpose() * a + DenseMatrix::identity(n, n) * lambda;
        let chol = lhs
            .cholesky()
            .ok_or_else(|| Error::invalid("normal equations are not positive definite"))?;
        Ok(chol.solve(&(a.transpose() * y)))
    } else {
        Ok(linalg::pseudoinverse(a)? * y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, stream};

    #[test]
    fn identity_error_is_n_minus_k() {
        let a = DenseMatrix::identity(7, 7);
        assert!((exact_lra_error(&a, 3).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_error() {
        let a = DenseMatrix::from_diagonal(&Vector::from_vec(vec![3.0, 2.0, 1.0]));
        assert!((exact_lra_error(&a, 1).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn error_matches_independent_eigensolve() {
        let g = gaussian_matrix(25, 25, &mut stream(1, 0));
        let a = &g * g.transpose();
        let mut ev: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let tail: f64 = ev[4..].iter().map(|v| v * v).sum();
        assert!((exact_lra_error(&a, 4).unwrap() - tail).abs() < 1e-8 * tail);
    }

    #[test]
    fn fkv_recovers_rank_k() {
        let mut rng = stream(2, 0);
        let a = gaussian_matrix(40, 3, &mut rng) * gaussian_matrix(3, 30, &mut rng);
        let v = fkv_reference(&a, 3, 20, &mut rng).unwrap();
        assert!(linalg::frobenius_sq(&(&a - &a * &v * v.transpose())) < 1e-16 * linalg::frobenius_sq(&a));
    }

    #[test]
    fn fkv_additive_bound_over_seeds() {
        let mut rng = stream(3, 0);
        let g = gaussian_matrix(200, 4, &mut rng);
        let a = &g * g.transpose() + gaussian_matrix(200, 200, &mut rng) * 0.5;
        let (k, eps) = (4, 0.25);
        let opt = exact_lra_error(&a, k).unwrap();
        let total = linalg::frobenius_sq(&a);
        let s = (4.0 * k as f64 / eps).ceil() as usize;
        let mut ok = 0;
        for seed in 0..20 {
            let v = fkv_reference(&a, k, s, &mut stream(seed, 1)).unwrap();
            if linalg::frobenius_sq(&(&a - &a * &v * v.transpose())) <= opt + eps * total {
                ok += 1;
            }
        }
        assert!(ok >= 18, "{ok}");
    }

    #[test]
    fn fkv_of_zero_is_a_basis() {
        let v = fkv_reference(&DenseMatrix::zeros(5, 5), 2, 3, &mut stream(4, 0)).unwrap();
        assert!(linalg::orthonormality_defect(&v) < 1e-14);
    }

    #[test]
    fn statdim_limits() {
        let g = gaussian_matrix(12, 5, &mut stream(5, 0));
        let a = &g * g.transpose();
        assert!((exact_statdim(&a, 0.0).unwrap() - 5.0).abs() < 1e-9);
        assert!(exact_statdim(&a, 1e12).unwrap() < 1e-6);
    }

    #[test]
    fn statdim_matches_eigen_sum() {
        let g = gaussian_matrix(15, 15, &mut stream(6, 0));
        let a = &g * g.transpose();
        let ev = a.clone().symmetric_eigen().eigenvalues;
        let want: f64 = ev.iter().map(|v| v * v / (v * v + 3.0)).sum();
        assert!((exact_statdim(&a, 3.0).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn dense_solve_satisfies_normal_equations() {
        let mut rng = stream(7, 0);
        let a = gaussian_matrix(10, 10, &mut rng);
        let y = Vector::from_iterator(10, gaussian_matrix(10, 1, &mut rng).iter().copied());
        let x = dense_ridge_solve(&a, &y, 0.5).unwrap();
        let resid = a.transpose() * (&a * &x - &y) + &x * 0.5;
        assert!(resid.norm() < 1e-10);
    }
}
