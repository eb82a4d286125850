//! Dense kernels every other module builds on: SVD, truncation,
//! pseudoinverse, PSD square root and orthonormal bases.
//!
//! Matrices are plain [`nalgebra::DMatrix<f64>`]. All routines are pure and
//! reject non-finite input with [`Error::InvalidInput`].

mod io;

pub use io::{read_matrix, read_matrix_from, write_matrix, write_matrix_to};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Numerical tolerances shared by the kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Reconstruction error allowed for `U Σ Vᵀ` and `R·R`, relative to `1 + σ_max`.
    pub recon: f64,
    /// Deviation of `UᵀU` from the identity.
    pub ortho: f64,
    /// Singular values below `rel_cutoff · σ_max` count as zero.
    pub rel_cutoff: f64,
    /// Penrose identity residual, relative to `1 + ‖A‖ ‖A⁺‖`.
    pub pinv: f64,
    /// Most negative eigenvalue accepted as PSD, relative to `1 + |λ|_max`.
    pub psd: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        recon: 1e-9,
        ortho: 1e-9,
        rel_cutoff: 1e-10,
        pinv: 1e-8,
        psd: 1e-9,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Thin SVD with singular values sorted in nonincreasing order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub singular_values: Vector,
    pub vt: DenseMatrix,
}

impl SvdResult {
    /// Orthonormal factors that reproduce `a` to rounding level.
    fn is_accurate(&self, a: &DenseMatrix) -> bool {
        let (m, n) = a.shape();
        let p = self.singular_values.len();
        let scale = a.norm().max(f64::MIN_POSITIVE);
        let tol = 1e3 * f64::EPSILON * (m + n) as f64;
        if self.singular_values.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return false;
        }
        let mut us = self.u.clone();
        for j in 0..p {
            us.column_mut(j).scale_mut(self.singular_values[j]);
        }
        let ident = DenseMatrix::identity(p, p);
        (us * &self.vt - a).norm() <= tol * scale
            && (self.u.transpose() * &self.u - &ident).amax() <= tol
            && (&self.vt * self.vt.transpose() - &ident).amax() <= tol
    }

    /// Number of singular values above `rel_cutoff · σ_max`.
    pub fn rank(&self, rel_cutoff: f64) -> usize {
        let top = self.singular_values.get(0).copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .take_while(|&&s| s > rel_cutoff * top)
            .count()
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        let mut us = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * &self.vt
    }

    /// Sum of squared singular values beyond the first `k`.
    pub fn tail_energy(&self, k: usize) -> f64 {
        self.singular_values.iter().skip(k).map(|s| s * s).sum()
    }

    /// First `r` right singular vectors as columns (`cols × r`).
    pub fn right_vectors(&self, r: usize) -> DenseMatrix {
        self.vt.rows(0, r.min(self.vt.nrows())).transpose()
    }

    pub fn left_vectors(&self, r: usize) -> DenseMatrix {
        self.u.columns(0, r.min(self.u.ncols())).into_owned()
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues nonincreasing.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vector,
    pub vectors: DenseMatrix,
}

pub(crate) fn ensure_finite(a: &DenseMatrix, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what}: matrix has non-finite entries")))
    }
}

pub fn is_symmetric(a: &DenseMatrix, tol: f64) -> bool {
    if !a.is_square() {
        return false;
    }
    let scale = 1.0 + a.amax();
    let n = a.nrows();
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= tol * scale))
}

/// Symmetric eigendecomposition; the input is symmetrised first.
pub fn sym_eigen(a: &DenseMatrix) -> Result<SymEigen> {
    ensure_finite(a, "sym_eigen")?;
    if !a.is_square() {
        return Err(Error::invalid("sym_eigen: matrix is not square"));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEigen { values, vectors })
}

/// Thin SVD. Exactly symmetric square inputs go through the symmetric
/// eigensolver; everything else through the general bidiagonal SVD.
pub fn svd(a: &DenseMatrix) -> Result<SvdResult> {
    ensure_finite(a, "svd")?;
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(SvdResult {
            u: DenseMatrix::zeros(m, 0),
            singular_values: Vector::zeros(0),
            vt: DenseMatrix::zeros(0, n),
        });
    }
    if is_symmetric(a, 0.0) {
        return Ok(svd_symmetric(a));
    }
    if let Some(s) = svd_bidiagonal(a) {
        return Ok(s);
    }
    // the bidiagonal iteration occasionally stalls or returns a wrong
    // factorization on rank-deficient inputs
    Ok(svd_augmented(a))
}

fn svd_bidiagonal(a: &DenseMatrix) -> Option<SvdResult> {
    let (m, n) = a.shape();
    let raw = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, 100 * (m + n) + 100)?;
    let u = raw.u?;
    let vt = raw.v_t?;
    let r = raw.singular_values.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| raw.singular_values[y].total_cmp(&raw.singular_values[x]));
    let mut su = DenseMatrix::zeros(m, r);
    let mut svt = DenseMatrix::zeros(r, n);
    for (dst, &src) in order.iter().enumerate() {
        su.set_column(dst, &u.column(src));
        svt.set_row(dst, &vt.row(src));
    }
    let singular_values = Vector::from_iterator(r, order.iter().map(|&i| raw.singular_values[i]));
    let s = SvdResult {
        u: su,
        singular_values,
        vt: svt,
    };
    s.is_accurate(a).then_some(s)
}

/// SVD read off the eigendecomposition of `[[0, A], [Aᵀ, 0]]`, whose
/// eigenvalues are `±σᵢ`. Directions with `σ` at rounding level are
/// completed to orthonormal bases.
fn svd_augmented(a: &DenseMatrix) -> SvdResult {
    let (m, n) = a.shape();
    let p = m.min(n);
    let mut h = DenseMatrix::zeros(m + n, m + n);
    h.view_mut((0, m), (m, n)).copy_from(a);
    h.view_mut((m, 0), (n, m)).copy_from(&a.transpose());
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..m + n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let floor = 1e3 * f64::EPSILON * (m + n) as f64 * top;
    let kept: Vec<usize> = order[..p].iter().copied().filter(|&i| eig.eigenvalues[i] > floor).collect();
    let r = kept.len();
    let mut u = DenseMatrix::zeros(m, p);
    let mut v = DenseMatrix::zeros(n, p);
    let mut sv = Vector::zeros(p);
    let root2 = std::f64::consts::SQRT_2;
    for (dst, &src) in kept.iter().enumerate() {
        let x = eig.eigenvectors.column(src);
        u.set_column(dst, &(x.rows(0, m) * root2));
        v.set_column(dst, &(x.rows(m, n) * root2));
        sv[dst] = eig.eigenvalues[src];
    }
    for (dst, &src) in order[r..p].iter().enumerate() {
        sv[r + dst] = eig.eigenvalues[src].abs().min(floor);
    }
    if r > 0 {
        let qu = u.columns(0, r).into_owned().qr().q();
        let qv = v.columns(0, r).into_owned().qr().q();
        // keep the signs the eigenvectors carried
        {
            for j in 0..r {
                let su = qu.column(j).dot(&u.column(j)).signum();
                let sv_ = qv.column(j).dot(&v.column(j)).signum();
                u.set_column(j, &(qu.column(j) * su));
                v.set_column(j, &(qv.column(j) * sv_));
            }
        }
    }
    complete_basis(&mut u, r);
    complete_basis(&mut v, r);
    SvdResult {
        u,
        singular_values: sv,
        vt: v.transpose(),
    }
}

/// Fills columns `have..` of `q` with an orthonormal basis of a subspace
/// orthogonal to its first `have` columns.
fn complete_basis(q: &mut DenseMatrix, have: usize) {
    let (m, p) = q.shape();
    if have >= p {
        return;
    }
    let mut proj = DenseMatrix::identity(m, m);
    if have > 0 {
        let b = q.columns(0, have);
        proj -= &b * b.transpose();
    }
    let eig = proj.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    for j in have..p {
        q.set_column(j, &eig.eigenvectors.column(order[j - have]));
    }
}

fn svd_symmetric(a: &DenseMatrix) -> SvdResult {
    let eig = a.clone().symmetric_eigen();
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].abs().total_cmp(&eig.eigenvalues[x].abs()));
    let mut u = DenseMatrix::zeros(n, n);
    let mut vt = DenseMatrix::zeros(n, n);
    let mut sv = Vector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let lambda = eig.eigenvalues[src];
        let v = eig.eigenvectors.column(src);
        sv[dst] = lambda.abs();
        vt.set_row(dst, &v.transpose());
        if lambda < 0.0 {
            u.set_column(dst, &(-v));
        } else {
            u.set_column(dst, &v);
        }
    }
    SvdResult {
        u,
        singular_values: sv,
        vt,
    }
}

/// Best rank-`k` approximation `U Σ_k Vᵀ`.
pub fn truncate_k(s: &SvdResult, k: usize) -> Result<DenseMatrix> {
    let available = s.singular_values.len();
    if k > available {
        return Err(Error::invalid(format!(
            "truncate_k: k = {k} exceeds the {available} available singular values"
        )));
    }
    let mut uk = s.u.columns(0, k).into_owned();
    for j in 0..k {
        uk.column_mut(j).scale_mut(s.singular_values[j]);
    }
    Ok(uk * s.vt.rows(0, k))
}

/// Best rank-`k` approximation of `a` (k is clamped to the available rank).
pub fn best_rank_k(a: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    let s = svd(a)?;
    truncate_k(&s, k.min(s.singular_values.len()))
}

pub fn pseudoinverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    pseudoinverse_with(a, &Tolerances::DEFAULT)
}

/// Moore–Penrose pseudoinverse; singular values below
/// `tol.rel_cutoff · σ_max` are treated as zero.
pub fn pseudoinverse_with(a: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix> {
    let (m, n) = a.shape();
    let s = svd(a)?;
    let r = s.rank(tol.rel_cutoff);
    if r == 0 {
        return Ok(DenseMatrix::zeros(n, m));
    }
    let mut v = s.vt.rows(0, r).transpose();
    for j in 0..r {
        v.column_mut(j).scale_mut(1.0 / s.singular_values[j]);
    }
    Ok(v * s.u.columns(0, r).transpose())
}

pub fn psd_sqrt(a: &DenseMatrix) -> Result<DenseMatrix> {
    psd_sqrt_with(a, &Tolerances::DEFAULT)
}

/// Symmetric PSD square root. Eigenvalues in `[-tol.psd·(1+|λ|_max), 0)` are
/// clamped to zero; anything more negative is rejected.
pub fn psd_sqrt_with(a: &DenseMatrix, tol: &Tolerances) -> Result<DenseMatrix> {
    let eig = sym_eigen(a)?;
    let scale = 1.0 + eig.values.amax();
    let threshold = tol.psd * scale;
    let n = eig.values.len();
    if n == 0 {
        return Ok(a.clone());
    }
    let min = eig.values[n - 1];
    if min < -threshold {
        return Err(Error::NotPsd {
            eigenvalue: min,
            tolerance: threshold,
        });
    }
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        scaled.column_mut(j).scale_mut(eig.values[j].max(0.0).sqrt());
    }
    let root = &scaled * eig.vectors.transpose();
    Ok((&root + root.transpose()) * 0.5)
}

/// Orthonormal basis for the column span of `w`; the column count equals the
/// numerical rank of `w`.
pub fn orthonormal_basis(w: &DenseMatrix) -> DenseMatrix {
    orthonormal_basis_with(w, &Tolerances::DEFAULT)
}

pub fn orthonormal_basis_with(w: &DenseMatrix, tol: &Tolerances) -> DenseMatrix {
    match svd(w) {
        Ok(s) => {
            let r = s.rank(tol.rel_cutoff);
            s.u.columns(0, r).into_owned()
        }
        Err(_) => DenseMatrix::zeros(w.nrows(), 0),
    }
}

pub fn frobenius_sq(a: &DenseMatrix) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Largest singular value.
pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0.0;
    }
    // eigenvalues of the smaller Gram matrix
    let gram = if m >= n {
        a.transpose() * a
    } else {
        a * a.transpose()
    };
    let eig = gram.symmetric_eigen();
    eig.eigenvalues.max().max(0.0).sqrt()
}

/// `‖A‖₂²`, the squared spectral norm.
pub fn spectral_norm_sq(a: &DenseMatrix) -> f64 {
    let s = spectral_norm(a);
    s * s
}

/// Top-`r` right singular vectors of `a` as columns.
pub fn top_right_singular_vectors(a: &DenseMatrix, r: usize) -> Result<DenseMatrix> {
    let s = svd(a)?;
    Ok(s.right_vectors(r))
}

/// Projection of `a`'s columns onto the orthogonal complement of `col(q)`,
/// `q` having orthonormal columns.
pub fn residual_after_projection(q: &DenseMatrix, a: &DenseMatrix) -> DenseMatrix {
    a - q * (q.transpose() * a)
}

/// Maximum absolute entry of `QᵀQ − I`.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    let gram = q.transpose() * q;
    let k = gram.nrows();
    (gram - DenseMatrix::identity(k, k)).amax()
}
