use crate::error::{Error, Result, StageExt};
use crate::linalg::{self, DenseMatrix};
use crate::lra::{projection_to_lra_with_known, sf_projection, LowRankFactors, PipelineConfig};
use crate::oracle::{CachedSource, EntryAccess, StageMeter};
use crate::rng::{stream, streams};

/// `A = r·𝟙ᵀ + 𝟙·rᵀ − 2B` with `r` the first row of `A` and `B` the Gram
/// matrix of the points shifted so that the first one sits at the origin.
pub struct NegativeTypeDecomposition<'a> {
    inner: &'a dyn EntryAccess,
    /// `‖x_i‖²`, i.e. the first row of `A`.
    pub r1: Vec<f64>,
    /// `A_11`; zero for a genuine squared-distance matrix.
    pub offset: f64,
    /// Set when `A_11 ≠ 0` and the Gram entries were recentered.
    pub recentered: bool,
}

impl NegativeTypeDecomposition<'_> {
    /// `A`-queries paid per new entry of `B` (the first row is already known).
    pub const QUERIES_PER_B_ENTRY: u64 = 1;

    /// Rank-two part `r·𝟙ᵀ + 𝟙·rᵀ` at `(i, j)`.
    pub fn rank_two(&self, i: usize, j: usize) -> f64 {
        self.r1[i] + self.r1[j]
    }
}

impl EntryAccess for NegativeTypeDecomposition<'_> {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn entry(&self, i: usize, j: usize) -> Result<f64> {
        let a = self.inner.entry(i, j)?;
        Ok((self.r1[i] + self.r1[j] - a - self.offset) / 2.0)
    }

    fn queries(&self) -> u64 {
        self.inner.queries()
    }
}

/// Reads the first row (`n` queries) and exposes `B` as a derived oracle.
pub fn decompose_negative_type(access: &dyn EntryAccess) -> Result<NegativeTypeDecomposition<'_>> {
    let n = access.n();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let row = access.rows(&[0])?;
    let r1: Vec<f64> = row.iter().copied().collect();
    let offset = r1[0];
    Ok(NegativeTypeDecomposition {
        inner: access,
        r1,
        offset,
        recentered: offset != 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct NegativeTypeRun {
    pub factors: LowRankFactors,
    /// Orthonormal basis `Ω` of `[Q_B | 𝟙/√n | r]`.
    pub omega: DenseMatrix,
    pub stages: Vec<(String, u64)>,
    pub queries_total: u64,
    pub flags: Vec<String>,
    pub sizes: Vec<(String, f64)>,
}

/// Rank-`k` relative-error approximation of a negative-type squared-distance
/// matrix. The structured projection is computed on `B`, widened by the row
/// spaces of the rank-two part, then turned into factors of `A`.
pub fn negative_type_lra(
    raw: &dyn EntryAccess,
    k: usize,
    eps: f64,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<NegativeTypeRun> {
    let n = raw.n();
    let access = CachedSource::new(raw, cfg.symmetric_cache);
    let mut meter = StageMeter::start(&access);
    let dec = decompose_negative_type(&access).stage("decompose")?;
    meter.mark(&access, "first_row");
    let mut flags = Vec::new();
    if dec.recentered {
        flags.push(format!("A_11 = {} is nonzero; Gram entries recentered", dec.offset));
    }

    let sf = sf_projection(&dec, k, eps, cfg, seed, &mut meter)?;
    flags.extend(sf.flags.iter().cloned());

    let w = sf.q.ncols();
    let mut wide = DenseMatrix::zeros(n, w + 2);
    wide.columns_mut(0, w).copy_from(&sf.q);
    wide.column_mut(w).fill(1.0 / (n as f64).sqrt());
    let r_norm = dec.r1.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r_norm > 0.0 {
        for i in 0..n {
            wide[(i, w + 1)] = dec.r1[i] / r_norm;
        }
    }
    let omega = linalg::orthonormal_basis(&wide);

    // columns of B read in full are rows of A already in the cache
    let known: &[usize] = if cfg.symmetric_cache { &sf.full_columns } else { &[] };
    let proj = projection_to_lra_with_known(
        &access,
        &omega,
        k,
        eps,
        &cfg.projection,
        known,
        &mut stream(seed, streams::PROJECTION_ROWS),
    )
    .stage("projection")?;
    meter.mark(&access, "projection");
    let mut sizes = vec![
        ("k".to_string(), k as f64),
        ("eps".to_string(), eps),
        ("k_prime".to_string(), sf.k_prime as f64),
        ("t".to_string(), sf.t as f64),
        ("omega_width".to_string(), omega.ncols() as f64),
        ("sat_rows".to_string(), proj.sketch_shape.0 as f64),
        ("sat_cols".to_string(), proj.sketch_shape.1 as f64),
        ("final_regression_rows".to_string(), proj.regression_rows as f64),
    ];
    sizes.extend(cfg.constants());
    Ok(NegativeTypeRun {
        factors: proj.factors,
        omega,
        queries_total: meter.total(),
        stages: meter.into_stages(),
        flags,
        sizes,
    })
}
