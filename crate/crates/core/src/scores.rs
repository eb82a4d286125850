//! Leverage and ridge-leverage scores, exact and query-efficient.

use nalgebra::Cholesky;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, Vector};
use crate::oracle::EntryAccess;
use crate::rng::{distinct_subset, Rng};
use crate::sampling::SamplingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Leverage,
    Ridge(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub values: Vec<f64>,
    pub kind: ScoreKind,
    pub exact: bool,
    /// Set when a fallback path was taken (zero regularizer, floored λ).
    pub fallback: bool,
}

impl ScoreVector {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `τ_i(M) = m_i (MᵀM)⁺ m_iᵀ`, the squared row norms of an orthonormal
/// basis for `col(M)`.
pub fn leverage_scores(m: &DenseMatrix) -> Result<ScoreVector> {
    let s = linalg::svd(m)?;
    let r = s.rank(linalg::Tolerances::DEFAULT.rel_cutoff);
    let u = s.u.columns(0, r);
    Ok(ScoreVector {
        values: (0..m.nrows()).map(|i| u.row(i).norm_squared()).collect(),
        kind: ScoreKind::Leverage,
        exact: true,
        fallback: false,
    })
}

/// Squared row norms, the leverage scores of a matrix whose columns are
/// already orthonormal.
pub fn row_norms_sq(m: &DenseMatrix) -> Vec<f64> {
    (0..m.nrows()).map(|i| m.row(i).norm_squared()).collect()
}

/// Exact rank-`k` ridge leverage scores
/// `m_i (MᵀM + (‖M − M_k‖_F²/k) I)⁺ m_iᵀ`.
pub fn ridge_leverage_exact(m: &DenseMatrix, k: usize) -> Result<ScoreVector> {
    if k == 0 {
        return Err(Error::invalid("ridge scores need k >= 1"));
    }
    let s = linalg::svd(m)?;
    let lambda = s.tail_energy(k) / k as f64;
    let top = s.singular_values.get(0).copied().unwrap_or(0.0);
    if lambda <= 1e-14 * top * top {
        let mut lev = leverage_scores(m)?;
        lev.kind = ScoreKind::Ridge(k);
        lev.fallback = true;
        return Ok(lev);
    }
    let weights: Vec<f64> = s
        .singular_values
        .iter()
        .map(|sv| sv * sv / (sv * sv + lambda))
        .collect();
    Ok(ScoreVector {
        values: weighted_row_norms(&s.u, &weights),
        kind: ScoreKind::Ridge(k),
        exact: true,
        fallback: false,
    })
}

/// Exact `ρ^k(A^{1/2})` of a PSD matrix: the diagonal of `A(A + λI)⁻¹` with
/// `λ = Σ_{j>k} λ_j(A)/k`.
pub fn ridge_sqrt_exact(a: &DenseMatrix, k: usize) -> Result<ScoreVector> {
    if k == 0 {
        return Err(Error::invalid("ridge scores need k >= 1"));
    }
    let e = linalg::sym_eigen(a)?;
    let vals: Vec<f64> = e.values.iter().map(|v| v.max(0.0)).collect();
    let lambda: f64 = vals.iter().skip(k).sum::<f64>() / k as f64;
    let fallback = lambda <= 1e-14 * vals.first().copied().unwrap_or(0.0);
    let weights: Vec<f64> = vals
        .iter()
        .map(|&v| {
            if fallback {
                if v > 1e-10 * vals[0] {
                    1.0
                } else {
                    0.0
                }
            } else {
                v / (v + lambda)
            }
        })
        .collect();
    Ok(ScoreVector {
        values: weighted_row_norms(&e.vectors, &weights),
        kind: ScoreKind::Ridge(k),
        exact: true,
        fallback,
    })
}

fn weighted_row_norms(u: &DenseMatrix, weights: &[f64]) -> Vec<f64> {
    (0..u.nrows())
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| u[(i, j)] * u[(i, j)] * w)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect()
}

/// Tuning knobs of the recursive Nyström score estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeScoreConfig {
    /// Landmark `i` is kept with probability `min(1, landmark_factor · ρ̃_i)`.
    pub landmark_factor: f64,
    /// Recursion stops once the subset has at most `base_factor · k` indices.
    pub base_factor: usize,
    /// Final multiplier applied to every estimate before clamping at 1.
    pub safety: f64,
}

impl Default for RidgeScoreConfig {
    fn default() -> Self {
        RidgeScoreConfig {
            landmark_factor: 1.0,
            base_factor: 4,
            safety: 2.0,
        }
    }
}

/// Approximates `ρ^k(A^{1/2})` for a PSD `A` behind `access` by recursive
/// uniform halving: scores of a random half pick Nyström landmarks, whose
/// regularized kernel residuals score the full set.
pub fn approx_ridge_sqrt(
    access: &dyn EntryAccess,
    k: usize,
    cfg: &RidgeScoreConfig,
    rng: &mut Rng,
) -> Result<ScoreVector> {
    if k == 0 {
        return Err(Error::invalid("ridge scores need k >= 1"));
    }
    let n = access.n();
    let diag = access.diagonal()?;
    if diag.iter().any(|d| *d < 0.0) {
        return Err(Error::invalid("negative diagonal entry; matrix is not PSD"));
    }
    let all: Vec<usize> = (0..n).collect();
    let mut fallback = false;
    let raw = recurse(access, &all, &diag, k, cfg, rng, &mut fallback)?;
    let values = raw
        .into_iter()
        .map(|v| (v * cfg.safety).clamp(0.0, 1.0))
        .collect();
    Ok(ScoreVector {
        values,
        kind: ScoreKind::Ridge(k),
        exact: false,
        fallback,
    })
}

fn recurse(
    access: &dyn EntryAccess,
    idx: &[usize],
    diag: &Vector,
    k: usize,
    cfg: &RidgeScoreConfig,
    rng: &mut Rng,
    fallback: &mut bool,
) -> Result<Vec<f64>> {
    let m = idx.len();
    if m <= (cfg.base_factor * k).max(2) {
        let sub = access.submatrix(idx, idx)?;
        let s = ridge_sqrt_exact(&sub, k)?;
        *fallback |= s.fallback;
        return Ok(s.values);
    }
    let half_pos = distinct_subset(m, m.div_ceil(2), rng);
    let half: Vec<usize> = half_pos.iter().map(|&p| idx[p]).collect();
    let half_scores = recurse(access, &half, diag, k, cfg, rng, fallback)?;

    let mut landmarks: Vec<usize> = Vec::new();
    for (&i, &s) in half.iter().zip(&half_scores) {
        let p = (cfg.landmark_factor * s).min(1.0);
        if rng.random::<f64>() < p {
            landmarks.push(i);
        }
    }
    if landmarks.is_empty() {
        // keep the largest-score point so the estimate stays defined
        let best = half_scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(p, _)| half[p])
            .expect("half is nonempty");
        landmarks.push(best);
    }
    nystrom_scores(access, idx, &landmarks, diag, k, fallback)
}

/// `(A_ii − A_iJ (A_JJ + λ̃I)⁻¹ A_Ji)/λ̃` for every `i ∈ idx`, where λ̃ is the
/// rank-`k` tail of `A_II` estimated through the Nyström approximation.
fn nystrom_scores(
    access: &dyn EntryAccess,
    idx: &[usize],
    landmarks: &[usize],
    diag: &Vector,
    k: usize,
    fallback: &mut bool,
) -> Result<Vec<f64>> {
    let k_ij = access.submatrix(idx, landmarks)?;
    let k_jj = access.submatrix(landmarks, landmarks)?;
    let trace: f64 = idx.iter().map(|&i| diag[i]).sum();

    // eigenvalues of the Nyström approximation K_IJ K_JJ⁺ K_JI
    let root_pinv = psd_pinv_sqrt(&k_jj)?;
    let core = &root_pinv * (k_ij.transpose() * &k_ij) * &root_pinv;
    let eig = linalg::sym_eigen(&core)?;
    let head: f64 = eig.values.iter().take(k).map(|v| v.max(0.0)).sum();
    let mut lambda = (trace - head) / k as f64;
    let floor = 1e-10 * trace.max(f64::MIN_POSITIVE) / idx.len() as f64;
    if !(lambda > floor) {
        lambda = floor;
        *fallback = true;
    }

    let jj = landmarks.len();
    let mut reg = k_jj.clone();
    for d in 0..jj {
        reg[(d, d)] += lambda;
    }
    let chol = Cholesky::new(reg).ok_or_else(|| {
        Error::invalid("regularized landmark kernel is not positive definite")
    })?;
    let mut y = k_ij.transpose();
    chol.l().solve_lower_triangular_mut(&mut y);
    Ok(idx
        .iter()
        .enumerate()
        .map(|(p, &i)| ((diag[i] - y.column(p).norm_squared()) / lambda).clamp(0.0, 1.0))
        .collect())
}

fn psd_pinv_sqrt(a: &DenseMatrix) -> Result<DenseMatrix> {
    let e = linalg::sym_eigen(a)?;
    let top = e.values.get(0).copied().unwrap_or(0.0);
    let n = e.values.len();
    let mut scaled = e.vectors.clone();
    for j in 0..n {
        let v = e.values[j];
        let w = if v > 1e-10 * top { 1.0 / v.sqrt() } else { 0.0 };
        scaled.column_mut(j).scale_mut(w);
    }
    Ok(&scaled * e.vectors.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerMode {
    /// Exactly `t` i.i.d. draws with `p_i ∝ score_i`, weight `1/√(t p_i)`.
    WithReplacement,
    /// Index `j` kept independently with `q_j = min(oversample · score_j, 1)`,
    /// weight `1/√q_j`.
    Independent { oversample: f64 },
}

/// Builds a sampler from nonnegative scores.
pub fn build_sampler(scores: &[f64], t: usize, mode: SamplerMode, rng: &mut Rng) -> Result<SamplingMatrix> {
    if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::invalid("scores must be finite and nonnegative"));
    }
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("scores are all zero"));
    }
    let n = scores.len();
    match mode {
        SamplerMode::WithReplacement => {
            if t == 0 {
                return Err(Error::invalid("sample size must be at least 1"));
            }
            let mut cdf = Vec::with_capacity(n);
            let mut acc = 0.0;
            for s in scores {
                acc += s;
                cdf.push(acc);
            }
            let mut indices = Vec::with_capacity(t);
            let mut weights = Vec::with_capacity(t);
            for _ in 0..t {
                let u = rng.random::<f64>() * acc;
                // first index whose cumulative mass exceeds u; ties go low
                let i = cdf.partition_point(|&c| c <= u).min(n - 1);
                let p = scores[i] / total;
                indices.push(i);
                weights.push(1.0 / (t as f64 * p).sqrt());
            }
            Ok(SamplingMatrix::new(n, indices, weights)?.with_expected_size(t as f64))
        }
        SamplerMode::Independent { oversample } => {
            if !(oversample > 0.0) {
                return Err(Error::invalid("oversampling factor must be positive"));
            }
            let mut indices = Vec::new();
            let mut weights = Vec::new();
            let mut expected = 0.0;
            for (j, &s) in scores.iter().enumerate() {
                let q = (s * oversample).min(1.0);
                expected += q;
                if q > 0.0 && (q >= 1.0 || rng.random::<f64>() < q) {
                    indices.push(j);
                    weights.push(1.0 / q.sqrt());
                }
            }
            Ok(SamplingMatrix::new(n, indices, weights)?.with_expected_size(expected))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{CachedSource, QueryOracle};
    use crate::rng::{gaussian_matrix, stream};

    #[test]
    fn leverage_of_identity_is_one() {
        let s = leverage_scores(&DenseMatrix::identity(5, 5)).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn leverage_of_orthonormal_is_row_norms() {
        let q = linalg::orthonormal_basis(&gaussian_matrix(9, 3, &mut stream(1, 0)));
        let s = leverage_scores(&q).unwrap();
        for (a, b) in s.values.iter().zip(row_norms_sq(&q)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn leverage_sums_to_rank() {
        let m = gaussian_matrix(7, 3, &mut stream(2, 0));
        assert!((leverage_scores(&m).unwrap().sum() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn ridge_scores_of_exact_rank_k_are_leverage() {
        let mut rng = stream(3, 0);
        let m = gaussian_matrix(8, 2, &mut rng) * gaussian_matrix(2, 6, &mut rng);
        let r = ridge_leverage_exact(&m, 2).unwrap();
        let l = leverage_scores(&m).unwrap();
        assert!(r.fallback);
        for (a, b) in r.values.iter().zip(&l.values) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn ridge_scores_of_diagonal_closed_form() {
        let d = Vector::from_vec(vec![2.0, 1.0, 1.0, 1.0, 1.0]);
        let m = DenseMatrix::from_diagonal(&d);
        let r = ridge_leverage_exact(&m, 1).unwrap();
        let tail: f64 = d.iter().skip(1).map(|x| x * x).sum();
        for i in 0..5 {
            let expect = d[i] * d[i] / (d[i] * d[i] + tail);
            assert!((r.values[i] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ridge_scores_sum_at_most_two_k() {
        let mut rng = stream(4, 0);
        for k in 1..5 {
            let m = gaussian_matrix(12, 9, &mut rng);
            assert!(ridge_leverage_exact(&m, k).unwrap().sum() <= 2.0 * k as f64 + 1e-9);
        }
    }

    #[test]
    fn approx_scores_on_identity() {
        let n = 200;
        let o = QueryOracle::new(DenseMatrix::identity(n, n)).unwrap();
        let c = CachedSource::new(&o, true);
        let s = approx_ridge_sqrt(&c, 1, &RidgeScoreConfig::default(), &mut stream(5, 0)).unwrap();
        let exact = 1.0 / (1.0 + (n as f64 - 1.0));
        for v in s.values {
            assert!(v >= exact - 1e-12 && v <= 3.0 * exact, "{v} vs {exact}");
        }
    }

    #[test]
    fn approx_scores_overestimate_low_rank_gram() {
        let n = 150;
        let mut rng = stream(6, 0);
        let g = gaussian_matrix(n, 3, &mut rng);
        one_sided(&g * g.transpose(), 3);
        one_sided(&g * g.transpose() + DenseMatrix::identity(n, n) * 0.5, 3);
    }

    fn one_sided(a: DenseMatrix, k: usize) {
        let exact = ridge_sqrt_exact(&a, k).unwrap();
        let o = QueryOracle::new(a).unwrap();
        let mut failures = 0;
        for seed in 0..20 {
            let c = CachedSource::new(&o, true);
            let s = approx_ridge_sqrt(&c, k, &RidgeScoreConfig::default(), &mut stream(seed, 1)).unwrap();
            if s.values.iter().zip(&exact.values).any(|(a, e)| *a < e - 1e-9) {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} one-sidedness failures");
    }

    #[test]
    fn uniform_sampler_with_full_t_has_unit_weights() {
        let s = build_sampler(&[1.0; 6], 6, SamplerMode::WithReplacement, &mut stream(7, 0)).unwrap();
        assert_eq!(s.len(), 6);
        assert!(s.weights().iter().all(|w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn independent_sampler_with_unit_probabilities_is_identity() {
        let s = build_sampler(&[1.0; 4], 0, SamplerMode::Independent { oversample: 1.0 }, &mut stream(8, 0)).unwrap();
        assert_eq!(s, SamplingMatrix::identity(4).with_expected_size(4.0));
    }

    #[test]
    fn sampler_rejects_zero_scores() {
        assert!(build_sampler(&[0.0; 3], 2, SamplerMode::WithReplacement, &mut stream(9, 0)).is_err());
    }

    #[test]
    fn sampler_frobenius_is_unbiased() {
        let mut rng = stream(10, 0);
        let m = gaussian_matrix(5, 30, &mut rng);
        let scores: Vec<f64> = (0..30).map(|j| 0.1 + m.column(j).norm_squared()).collect();
        let truth = linalg::frobenius_sq(&m);
        let draws: Vec<f64> = (0..500)
            .map(|_| {
                let s = build_sampler(&scores, 8, SamplerMode::WithReplacement, &mut rng).unwrap();
                linalg::frobenius_sq(&s.select_cols(&m))
            })
            .collect();
        let mean = draws.iter().sum::<f64>() / 500.0;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 499.0;
        let se = (var / 500.0).sqrt();
        assert!((mean - truth).abs() <= 3.0 * se + 1e-9, "{mean} vs {truth} (se {se})");
    }
}
