//! Spectral regression `min_W ‖C − W Zᵀ‖₂` for `Z` with orthonormal columns.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::oracle::EntryAccess;
use crate::pcp::PcpSketch;
use crate::rng::Rng;
use crate::sampling::SamplingMatrix;
use crate::scores::{build_sampler, row_norms_sq, SamplerMode};

/// Where the columns of `C` come from.
pub enum ColumnSource<'a> {
    Dense(&'a DenseMatrix),
    /// A lazy column PCP; columns are read through `access` on demand.
    Lazy {
        sketch: &'a PcpSketch,
        access: &'a dyn EntryAccess,
    },
}

impl ColumnSource<'_> {
    pub fn ncols(&self) -> usize {
        match self {
            ColumnSource::Dense(c) => c.ncols(),
            ColumnSource::Lazy { sketch, .. } => sketch.width(),
        }
    }

    pub fn columns(&self, positions: &[usize]) -> Result<DenseMatrix> {
        match self {
            ColumnSource::Dense(c) => Ok(DenseMatrix::from_fn(c.nrows(), positions.len(), |i, b| {
                c[(i, positions[b])]
            })),
            ColumnSource::Lazy { sketch, access } => sketch.column_block(*access, positions),
        }
    }
}

/// `W* = C·Z` and `‖C − C Z Zᵀ‖₂²`.
pub fn spectral_opt_exact(c: &DenseMatrix, z: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    if c.ncols() != z.nrows() {
        return Err(Error::invalid("C and Z have incompatible shapes"));
    }
    let w = c * z;
    let opt = linalg::spectral_norm_sq(&(c - &w * z.transpose()));
    Ok((w, opt))
}

/// `‖C − W Zᵀ‖₂²`.
pub fn spectral_cost(c: &DenseMatrix, w: &DenseMatrix, z: &DenseMatrix) -> f64 {
    linalg::spectral_norm_sq(&(c - w * z.transpose()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecRegConfig {
    /// Multiplier on the `ln(max(k/ε, 16))` oversampling factor.
    pub oversample_scale: f64,
    /// Resampling attempts (oversampling doubled each time) before giving up.
    pub max_retries: usize,
}

impl Default for SpecRegConfig {
    fn default() -> Self {
        SpecRegConfig {
            oversample_scale: 2.0,
            max_retries: 3,
        }
    }
}

/// `ln(max(k/ε, 16))`.
pub fn oversampling_log(k: usize, eps: f64) -> f64 {
    (k as f64 / eps).max(16.0).ln()
}

#[derive(Debug, Clone)]
pub struct SketchedRegression {
    pub w_hat: DenseMatrix,
    pub sampler: SamplingMatrix,
    /// Entries read from the backing oracle.
    pub queries: u64,
    pub retries: usize,
}

/// `Ŵ = CS (ZᵀS)⁺` with `S` keeping column `j` of `C` independently with
/// probability `min(‖Z_j‖²·ln(max(k/ε,16)), 1)`.
pub fn spectral_reg_sketched(
    src: &ColumnSource<'_>,
    z: &DenseMatrix,
    k: usize,
    eps: f64,
    cfg: &SpecRegConfig,
    rng: &mut Rng,
) -> Result<SketchedRegression> {
    let m = src.ncols();
    if z.nrows() != m {
        return Err(Error::invalid("Z must have one row per column of C"));
    }
    let r = z.ncols();
    let lev = row_norms_sq(z);
    let before = match src {
        ColumnSource::Lazy { access, .. } => access.queries(),
        ColumnSource::Dense(_) => 0,
    };
    let mut oversample = oversampling_log(k, eps) * cfg.oversample_scale;
    let mut retries = 0;
    loop {
        let s = build_sampler(&lev, 0, SamplerMode::Independent { oversample }, rng)?;
        let zs = s.select_rows(z).transpose();
        let rank = linalg::svd(&zs)?.rank(linalg::Tolerances::DEFAULT.rel_cutoff);
        if rank == r {
            let positions = s.indices().to_vec();
            let mut cs = src.columns(&positions)?;
            for (b, w) in s.weights().iter().enumerate() {
                cs.column_mut(b).scale_mut(*w);
            }
            let w_hat = cs * linalg::pseudoinverse(&zs)?;
            let after = match src {
                ColumnSource::Lazy { access, .. } => access.queries(),
                ColumnSource::Dense(_) => 0,
            };
            return Ok(SketchedRegression {
                w_hat,
                sampler: s,
                queries: after - before,
                retries,
            });
        }
        if retries == cfg.max_retries {
            return Err(Error::RankDeficient {
                rank,
                required: r,
                retries,
            });
        }
        retries += 1;
        oversample *= 2.0;
    }
}

/// Extreme eigenvalues of `ZᵀSSᵀZ`; a constant-factor subspace embedding
/// keeps both inside `(0.9, 1.1)`.
pub fn embedding_window(z: &DenseMatrix, s: &SamplingMatrix) -> Result<(f64, f64)> {
    let sz = s.select_rows(z);
    let e = linalg::sym_eigen(&(sz.transpose() * &sz))?;
    let r = e.values.len();
    if r == 0 {
        return Ok((1.0, 1.0));
    }
    Ok((e.values[r - 1], e.values[0]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmmReport {
    /// `‖C* S Sᵀ Z‖₂²`.
    pub lhs: f64,
    /// `(ε/k)‖C*‖_F² + ‖C*‖₂²`.
    pub rhs: f64,
    /// `lhs / rhs`, zero when both vanish.
    pub ratio: f64,
    /// `‖C* S‖₂² / (‖C*‖₂² + (ε/k)‖C*‖_F²)`.
    pub sketch_ratio: f64,
}

/// Weak spectral approximate-matrix-product diagnostic for the residual
/// `C* = C(I − ZZᵀ)` under sampler `s`.
pub fn weak_amm_check(
    c_star: &DenseMatrix,
    z: &DenseMatrix,
    s: &SamplingMatrix,
    k: usize,
    eps: f64,
) -> AmmReport {
    let cs = s.select_cols(c_star);
    let lhs = linalg::spectral_norm_sq(&(&cs * s.select_rows(z)));
    let rhs = eps / k as f64 * linalg::frobenius_sq(c_star) + linalg::spectral_norm_sq(c_star);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    let sketch_ratio = if rhs > 0.0 {
        linalg::spectral_norm_sq(&cs) / rhs
    } else {
        0.0
    };
    AmmReport {
        lhs,
        rhs,
        ratio,
        sketch_ratio,
    }
}

/// Per-bucket diagnostics for the residual `C*S`: columns are split into
/// `buckets` groups by decreasing sampling weight and the squared spectral
/// norm of each group is reported. Instrumentation only.
pub fn bucket_norms(c_star: &DenseMatrix, s: &SamplingMatrix, buckets: usize) -> Vec<f64> {
    let cs = s.select_cols(c_star);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.weights()[b].total_cmp(&s.weights()[a]));
    let buckets = buckets.max(1);
    let per = order.len().div_ceil(buckets).max(1);
    order
        .chunks(per)
        .map(|chunk| {
            let block = DenseMatrix::from_fn(cs.nrows(), chunk.len(), |i, b| cs[(i, chunk[b])]);
            linalg::spectral_norm_sq(&block)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, stream};

    fn orth(m: usize, r: usize, seed: u64) -> DenseMatrix {
        linalg::orthonormal_basis(&gaussian_matrix(m, r, &mut stream(seed, 0)))
    }

    #[test]
    fn exact_recovery_in_row_space() {
        let z = orth(12, 3, 1);
        let c = gaussian_matrix(5, 3, &mut stream(2, 0)) * z.transpose();
        let (w, opt) = spectral_opt_exact(&c, &z).unwrap();
        assert!(opt < 1e-20);
        assert!((&w * z.transpose() - &c).amax() < 1e-12);
        let s = spectral_reg_sketched(&ColumnSource::Dense(&c), &z, 3, 0.5, &SpecRegConfig::default(), &mut stream(3, 0)).unwrap();
        assert!((&s.w_hat * z.transpose() - &c).amax() < 1e-9);
    }

    #[test]
    fn orthogonal_case() {
        let (n, m) = (4, 5);
        let mut z = DenseMatrix::zeros(m, 1);
        z[(0, 0)] = 1.0;
        let mut c = DenseMatrix::zeros(n, m);
        c[(n - 1, m - 1)] = 2.0;
        let (_, opt) = spectral_opt_exact(&c, &z).unwrap();
        assert!((opt - 4.0).abs() < 1e-12);
    }

    #[test]
    fn optimum_beats_random_competitors() {
        let mut rng = stream(4, 0);
        let c = gaussian_matrix(6, 10, &mut rng);
        let z = orth(10, 3, 5);
        let (_, opt) = spectral_opt_exact(&c, &z).unwrap();
        for _ in 0..100 {
            let w = gaussian_matrix(6, 3, &mut rng);
            assert!(spectral_cost(&c, &w, &z) >= opt - 1e-9);
        }
    }

    #[test]
    fn sketched_solution_lies_in_span_of_sampled_columns() {
        let mut rng = stream(6, 0);
        let c = gaussian_matrix(20, 40, &mut rng);
        let z = orth(40, 4, 7);
        let s = spectral_reg_sketched(&ColumnSource::Dense(&c), &z, 4, 0.5, &SpecRegConfig::default(), &mut rng).unwrap();
        let cs = s.sampler.select_cols(&c);
        let q = linalg::orthonormal_basis(&cs);
        let resid = linalg::residual_after_projection(&q, &s.w_hat);
        assert!(resid.amax() < 1e-9 * (1.0 + s.w_hat.amax()));
    }

    #[test]
    fn rank_deficiency_is_reported() {
        // Z has a row with all of one direction's mass, so dropping it loses rank
        let mut z = DenseMatrix::zeros(50, 2);
        z[(0, 0)] = 1.0;
        for i in 1..50 {
            z[(i, 1)] = (1.0f64 / 49.0).sqrt();
        }
        let c = DenseMatrix::identity(50, 50);
        let cfg = SpecRegConfig { oversample_scale: 1e-6, max_retries: 1 };
        let err = spectral_reg_sketched(&ColumnSource::Dense(&c), &z, 1, 0.5, &cfg, &mut stream(8, 0));
        assert!(matches!(err, Err(Error::RankDeficient { retries: 1, .. })));
    }

    #[test]
    fn amm_identity_sampler_is_zero() {
        let mut rng = stream(9, 0);
        let c = gaussian_matrix(6, 12, &mut rng);
        let z = orth(12, 3, 10);
        let c_star = &c - (&c * &z) * z.transpose();
        let rep = weak_amm_check(&c_star, &z, &SamplingMatrix::identity(12), 3, 0.5);
        assert!(rep.lhs < 1e-20);
        let zero = weak_amm_check(&DenseMatrix::zeros(6, 12), &z, &SamplingMatrix::identity(12), 3, 0.5);
        assert_eq!(zero.ratio, 0.0);
    }

    #[test]
    fn pythagorean_split() {
        let mut rng = stream(11, 0);
        let c = gaussian_matrix(7, 9, &mut rng);
        let z = orth(9, 3, 12);
        let (w_star, _) = spectral_opt_exact(&c, &z).unwrap();
        let c_star = &c - &w_star * z.transpose();
        for _ in 0..20 {
            let w = gaussian_matrix(7, 3, &mut rng);
            let y = linalg::orthonormal_basis(&gaussian_matrix(7, 1, &mut rng));
            let lhs = (y.transpose() * (&c - &w * z.transpose())).norm_squared();
            let rhs = (y.transpose() * &c_star).norm_squared()
                + (y.transpose() * (&w - &w_star) * z.transpose()).norm_squared();
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.max(1.0));
        }
    }

    #[test]
    fn bucket_norms_cover_all_columns() {
        let c = DenseMatrix::identity(6, 6);
        let b = bucket_norms(&c, &SamplingMatrix::identity(6), 3);
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|x| (x - 1.0).abs() < 1e-12));
    }
}
