//! Generators for every instance family.

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::spec::{Corruption, Family, InstanceSpec, RobustSplit};
use super::QueryOracle;
use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::rng::{gaussian_matrix, stream, streams, Rng};

/// Generator byproducts that evaluation and tests need.
#[derive(Debug, Clone, Default)]
pub struct InstanceMeta {
    /// Largest ratio between clean and observed diagonal entries (≥ 1).
    pub phi_max: f64,
    /// Index sets of planted blocks, if any.
    pub blocks: Vec<Vec<usize>>,
    /// Off-diagonal value inside planted blocks.
    pub block_value: Option<f64>,
    /// Clean diagonal value inside planted blocks (robust families).
    pub clean_block_diag: Option<f64>,
    /// robust_nu drew the identity branch.
    pub identity_branch: bool,
    /// negative_type: the generating points, one per row, first at the origin.
    pub points: Option<DenseMatrix>,
    /// Generator could not meet a target exactly (see `notes`).
    pub notes: Vec<String>,
}

/// A generated instance: its spec, the counted oracle and side information.
#[derive(Debug)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub oracle: QueryOracle,
    pub meta: InstanceMeta,
}

impl InstanceSpec {
    pub fn generate(&self) -> Result<Instance> {
        self.validate()?;
        let mut rng = stream(self.seed, streams::INSTANCE);
        let (hidden, truth, meta) = match self.family {
            Family::RandomPsd => {
                let a = random_psd(self.n, self.k, self.tail, &mut rng);
                (a, None, unit_meta())
            }
            Family::Correlation => correlation(self, &mut rng),
            Family::NegativeType => negative_type(self, &mut rng),
            Family::MwBlocks => {
                let side = block_side(self.eps, self.n, self.k);
                if self.k * side > self.n {
                    return Err(Error::invalid("blocks do not fit in n"));
                }
                let blocks = disjoint_blocks(self.n, self.k, side, &mut rng);
                let a = block_matrix(self.n, &blocks, 1.0, 1.0);
                let meta = InstanceMeta {
                    blocks,
                    block_value: Some(1.0),
                    ..unit_meta()
                };
                (a, None, meta)
            }
            Family::RobustMu => robust_mu(self, &mut rng)?,
            Family::RobustNu => {
                if rng.random_bool(0.5) {
                    robust_mu(self, &mut rng)?
                } else {
                    let meta = InstanceMeta {
                        identity_branch: true,
                        ..unit_meta()
                    };
                    (DenseMatrix::identity(self.n, self.n), None, meta)
                }
            }
            Family::RidgeHard => {
                let k0 = ridge_hard_blocks(self.s_lambda, self.eps);
                let side = block_side(self.eps, self.n, k0);
                if k0 * side > self.n {
                    return Err(Error::invalid(format!(
                        "{k0} blocks of side {side} do not fit in n = {}",
                        self.n
                    )));
                }
                let all = disjoint_blocks(self.n, k0, side, &mut rng);
                let blocks: Vec<Vec<usize>> =
                    all.into_iter().filter(|_| rng.random_bool(0.5)).collect();
                let a = block_matrix(self.n, &blocks, 1.0, 1.0);
                let meta = InstanceMeta {
                    blocks,
                    block_value: Some(1.0),
                    ..unit_meta()
                };
                (a, None, meta)
            }
        };
        let oracle = match truth {
            Some(t) => QueryOracle::with_ground_truth(hidden, t)?,
            None => QueryOracle::new(hidden)?,
        };
        Ok(Instance {
            spec: self.clone(),
            oracle,
            meta,
        })
    }
}

fn unit_meta() -> InstanceMeta {
    InstanceMeta {
        phi_max: 1.0,
        ..InstanceMeta::default()
    }
}

/// Side length `⌈√(2εn/k)⌉` of the planted all-ones blocks.
pub(crate) fn block_side(eps: f64, n: usize, k: usize) -> usize {
    (2.0 * eps * n as f64 / k as f64).sqrt().ceil().max(1.0) as usize
}

/// Number of candidate blocks `⌈s/ε²⌉` of the ridge hard instance.
pub(crate) fn ridge_hard_blocks(s_lambda: f64, eps: f64) -> usize {
    // small slack so that e.g. 0.04 / 0.2² does not round up to 2
    ((s_lambda / (eps * eps)) - 1e-9).ceil().max(1.0) as usize
}

/// `G Gᵀ + ζ W Wᵀ / n` with `G ∈ ℝ^{n×k}`, `W ∈ ℝ^{n×n}` Gaussian and ζ chosen
/// so the tail carries roughly `tail` times the head energy.
pub(crate) fn random_psd(n: usize, k: usize, tail: f64, rng: &mut Rng) -> DenseMatrix {
    let g = gaussian_matrix(n, k, rng);
    let mut a = &g * g.transpose();
    if tail > 0.0 {
        let zeta = (tail * k as f64 * n as f64 / 2.0).sqrt();
        let w = gaussian_matrix(n, n, rng);
        let noise = (&w * w.transpose()) * (zeta / n as f64);
        a += noise;
    }
    symmetrize(a)
}

fn symmetrize(a: DenseMatrix) -> DenseMatrix {
    (&a + a.transpose()) * 0.5
}

fn correlation(spec: &InstanceSpec, rng: &mut Rng) -> (DenseMatrix, Option<DenseMatrix>, InstanceMeta) {
    let n = spec.n;
    let p = random_psd(n, spec.k, spec.tail, rng);
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / p[(i, i)].sqrt()).collect();
    let mut a = DenseMatrix::from_fn(n, n, |i, j| p[(i, j)] * inv_sqrt[i] * inv_sqrt[j]);
    for i in 0..n {
        a[(i, i)] = 1.0;
    }
    let a = symmetrize(a);
    let meta = unit_meta();
    match spec.corruption {
        Corruption::None => (a, None, meta),
        Corruption::Diagonal => {
            let mut hidden = a.clone();
            for i in 0..n {
                hidden[(i, i)] += rng.random_range(0.0..4.0);
            }
            (hidden, Some(a), meta)
        }
        Corruption::Dense => {
            let mut noise = gaussian_matrix(n, n, rng);
            noise = symmetrize(noise);
            for i in 0..n {
                noise[(i, i)] = 0.0;
            }
            let scale = (spec.eta * linalg::frobenius_sq(&a) / linalg::frobenius_sq(&noise)).sqrt();
            let hidden = &a + noise * scale;
            (hidden, Some(a), meta)
        }
    }
}

fn negative_type(spec: &InstanceSpec, rng: &mut Rng) -> (DenseMatrix, Option<DenseMatrix>, InstanceMeta) {
    let (n, d) = (spec.n, spec.dim);
    let r = spec.k.min(d);
    let basis = linalg::orthonormal_basis(&gaussian_matrix(d, r, rng));
    let mut latent = gaussian_matrix(n, basis.ncols(), rng);
    // mildly decaying scales so the spectrum has a clear order
    for j in 0..latent.ncols() {
        latent.column_mut(j).scale_mut(1.0 / (1.0 + 0.3 * j as f64));
    }
    let mut x = latent * basis.transpose();
    if spec.noise > 0.0 {
        x += gaussian_matrix(n, d, rng) * spec.noise;
    }
    let origin = x.row(0).into_owned();
    for i in 0..n {
        let shifted = x.row(i) - &origin;
        x.set_row(i, &shifted);
    }
    let a = squared_distances(&x);
    let meta = InstanceMeta {
        points: Some(x),
        ..unit_meta()
    };
    (a, None, meta)
}

/// `A_ij = ‖x_i − x_j‖²` for the rows `x_i` of `points`.
pub fn squared_distances(points: &DenseMatrix) -> DenseMatrix {
    let n = points.nrows();
    let gram = points * points.transpose();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[(i, j)] = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
            }
        }
    }
    symmetrize(a)
}

fn disjoint_blocks(n: usize, count: usize, side: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    (0..count)
        .map(|b| {
            let mut block = perm[b * side..(b + 1) * side].to_vec();
            block.sort_unstable();
            block
        })
        .collect()
}

/// Identity outside the blocks; inside each block `diag` on the diagonal and
/// `off` elsewhere.
fn block_matrix(n: usize, blocks: &[Vec<usize>], diag: f64, off: f64) -> DenseMatrix {
    let mut a = DenseMatrix::identity(n, n);
    for block in blocks {
        for &i in block {
            for &j in block {
                a[(i, j)] = if i == j { diag } else { off };
            }
        }
    }
    a
}

fn robust_mu(
    spec: &InstanceSpec,
    rng: &mut Rng,
) -> Result<(DenseMatrix, Option<DenseMatrix>, InstanceMeta)> {
    let n = spec.n;
    let k = spec.k;
    let m = (5.0 * spec.eps / spec.eta - 1e-9).ceil() as usize;
    if k * m > n {
        return Err(Error::invalid(format!(
            "{k} blocks of side {m} do not fit in n = {n}"
        )));
    }
    let h = (spec.eta * spec.eta * n as f64 / (5.0 * spec.eps)).sqrt();
    let blocks = disjoint_blocks(n, k, m, rng);
    let mut notes = Vec::new();
    let a_diag = match spec.split {
        RobustSplit::RankOneBlock => h,
        RobustSplit::NormMatched => {
            let a = norm_matched_diagonal(n, k, m, h, spec.eta);
            if a < h {
                notes.push(format!(
                    "norm-matched diagonal {a:.4} below block value {h:.4}; raised to keep A PSD"
                ));
                h
            } else {
                a
            }
        }
    };
    let hidden = block_matrix(n, &blocks, 1.0, h);
    let clean = block_matrix(n, &blocks, a_diag, h);
    let phi_max = a_diag.max(1.0 / a_diag).max(1.0);
    let meta = InstanceMeta {
        phi_max,
        blocks,
        block_value: Some(h),
        clean_block_diag: Some(a_diag),
        notes,
        ..InstanceMeta::default()
    };
    Ok((hidden, Some(clean), meta))
}

/// Clean block diagonal `a > 1` with `k·m·(a−1)² = η‖A‖_F²`, where
/// `‖A‖_F² = n − km + km·a² + km(m−1)h²`.
fn norm_matched_diagonal(n: usize, k: usize, m: usize, h: f64, eta: f64) -> f64 {
    let km = (k * m) as f64;
    let rest = n as f64 - km + km * (m as f64 - 1.0) * h * h;
    // km(1−η)a² − 2km·a + km − η·rest = 0
    let qa = km * (1.0 - eta);
    let qb = -2.0 * km;
    let qc = km - eta * rest;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
    (-qb + disc.sqrt()) / (2.0 * qa)
}
