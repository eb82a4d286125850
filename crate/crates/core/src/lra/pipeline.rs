use super::{projection_to_lra_with_known, projection_to_psd, spectral_lra_small, LowRankFactors, ProjectionConfig, SfProjection, SpectralMode};
use crate::error::{Error, Result, StageExt};
use crate::rng::{gaussian_matrix, Rng};
use crate::linalg::{self, DenseMatrix};
use crate::oracle::{CachedSource, EntryAccess, StageMeter};
use crate::pcp::{column_pcp_ridge, row_pcp_ridge};
use crate::rng::{stream, streams};
use crate::scores::{approx_ridge_sqrt, RidgeScoreConfig};
use crate::specreg::{spectral_reg_sketched, ColumnSource, SpecRegConfig};

/// Sketch sizes and knobs of the sample-optimal pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    /// Fixed `k′`; otherwise `⌈k_prime_factor · k/ε⌉`.
    pub k_prime: Option<usize>,
    pub k_prime_factor: f64,
    /// PCP size `t = ⌈t_factor · √(n k′) · ln n⌉`.
    pub t_factor: f64,
    /// Nominal accuracy of the two stage PCPs (reported only).
    pub pcp_eps: f64,
    pub scores: RidgeScoreConfig,
    pub spectral: SpectralMode,
    pub specreg: SpecRegConfig,
    pub projection: ProjectionConfig,
    /// Share one cache slot between `(i, j)` and `(j, i)`.
    pub symmetric_cache: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_prime: None,
            k_prime_factor: 1.0,
            t_factor: 0.2,
            pcp_eps: 0.1,
            scores: RidgeScoreConfig::default(),
            spectral: SpectralMode::Exact,
            specreg: SpecRegConfig::default(),
            projection: ProjectionConfig::default(),
            symmetric_cache: true,
        }
    }
}

impl PipelineConfig {
    /// Settings for squared-distance inputs, whose tail directions sit close
    /// to the head and need a larger projection sketch.
    pub fn distance() -> Self {
        let mut cfg = PipelineConfig::default();
        cfg.projection.sample_factor = 1.0;
        cfg
    }

    pub fn k_prime(&self, n: usize, k: usize, eps: f64) -> usize {
        let kp = self
            .k_prime
            .unwrap_or_else(|| (self.k_prime_factor * k as f64 / eps).ceil() as usize);
        kp.max(k).min(n)
    }

    pub fn pcp_size(&self, n: usize, k_prime: usize) -> usize {
        let n_f = n as f64;
        (self.t_factor * (n_f * k_prime as f64).sqrt() * n_f.ln().max(1.0))
            .ceil()
            .max(k_prime as f64) as usize
    }

    /// Named constants recorded in run reports.
    pub fn constants(&self) -> Vec<(String, f64)> {
        vec![
            ("k_prime_factor".into(), self.k_prime_factor),
            ("t_factor".into(), self.t_factor),
            ("pcp_eps".into(), self.pcp_eps),
            ("landmark_factor".into(), self.scores.landmark_factor),
            ("score_safety".into(), self.scores.safety),
            ("specreg_oversample_scale".into(), self.specreg.oversample_scale),
            ("projection_sample_factor".into(), self.projection.sample_factor),
            ("projection_regression_factor".into(), self.projection.regression_factor),
        ]
    }
}

/// Output of the stages that build the structured projection `Q`.
#[derive(Debug, Clone)]
pub struct SfStages {
    pub q: DenseMatrix,
    pub k_prime: usize,
    pub t: usize,
    /// Distinct rows × columns of `R`.
    pub r_shape: (usize, usize),
    /// Columns of `A` read in full by the spectral regression.
    pub full_columns: Vec<usize>,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub factors: LowRankFactors,
    pub sf: SfProjection,
    /// Per-stage query counts; they sum to `queries_total`.
    pub stages: Vec<(String, u64)>,
    pub queries_total: u64,
    pub flags: Vec<String>,
    /// Realized sizes and constants.
    pub sizes: Vec<(String, f64)>,
}

/// Ridge scores → lazy column PCP → row PCP `R` → top-`k′` right singular
/// space `Z` of `R` → sketched spectral regression `Ŵ` → `Q = orth(Ŵ)`.
pub fn sf_projection(
    access: &dyn EntryAccess,
    k: usize,
    eps: f64,
    cfg: &PipelineConfig,
    seed: u64,
    meter: &mut StageMeter,
) -> Result<SfStages> {
    let n = access.n();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..=n")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("eps must lie in (0, 1)"));
    }
    let mut flags = Vec::new();
    let k_prime = cfg.k_prime(n, k, eps);
    let t = cfg.pcp_size(n, k_prime);

    let scores = approx_ridge_sqrt(access, k_prime, &cfg.scores, &mut stream(seed, streams::RIDGE_SCORES))
        .stage("ridge_scores")?;
    if scores.fallback {
        flags.push("ridge_scores: regularizer floored".to_string());
    }
    meter.mark(access, "ridge_scores");

    let c = column_pcp_ridge(n, &scores.values, k_prime, cfg.pcp_eps, t, &mut stream(seed, streams::COLUMN_PCP))
        .stage("column_pcp")?;
    meter.mark(access, "column_pcp");

    let r = row_pcp_ridge(&c, access, &scores.values, k_prime, cfg.pcp_eps, t, &mut stream(seed, streams::ROW_PCP))
        .stage("row_pcp")?;
    meter.mark(access, "row_pcp");
    let r_mat = r.sketch.as_ref().expect("row PCP is materialized");

    let z = spectral_lra_small(r_mat, k_prime, cfg.spectral, &mut stream(seed, streams::SPECTRAL_LRA))
        .stage("spectral_lra")?;
    meter.mark(access, "spectral_lra");

    let src = ColumnSource::Lazy { sketch: &c, access };
    let reg = spectral_reg_sketched(&src, &z, k, eps, &cfg.specreg, &mut stream(seed, streams::SPECTRAL_REGRESSION))
        .stage("spectral_regression")?;
    if reg.retries > 0 {
        flags.push(format!("spectral_regression: {} resample(s)", reg.retries));
    }
    let mut q = linalg::orthonormal_basis(&reg.w_hat);
    meter.mark(access, "spectral_regression");
    if q.ncols() < k {
        // the input has rank below k; any extra directions keep the guarantee
        flags.push(format!("projection: rank {} below k, padded", q.ncols()));
        q = pad_basis(&q, k, &mut stream(seed, streams::SPECTRAL_REGRESSION));
    }
    Ok(SfStages {
        q,
        k_prime,
        t,
        r_shape: r_mat.shape(),
        full_columns: reg.sampler.indices().iter().map(|&p| c.columns.indices()[p]).collect(),
        flags,
    })
}

/// Rank-`k` relative-error approximation of a PSD matrix from a sublinear
/// number of entry queries.
pub fn sample_optimal_lra(
    access: &dyn EntryAccess,
    k: usize,
    eps: f64,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PipelineRun> {
    run(access, k, eps, cfg, seed, false)
}

/// As [`sample_optimal_lra`] but the output is `M·Mᵀ`, PSD by construction.
pub fn sample_optimal_psd_output(
    access: &dyn EntryAccess,
    k: usize,
    eps: f64,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PipelineRun> {
    run(access, k, eps, cfg, seed, true)
}

fn run(
    raw: &dyn EntryAccess,
    k: usize,
    eps: f64,
    cfg: &PipelineConfig,
    seed: u64,
    psd: bool,
) -> Result<PipelineRun> {
    let access = CachedSource::new(raw, cfg.symmetric_cache);
    let mut meter = StageMeter::start(&access);
    let sf = sf_projection(&access, k, eps, cfg, seed, &mut meter)?;
    let mut rng = stream(seed, streams::PROJECTION_ROWS);
    let proj = if psd {
        projection_to_psd(&access, &sf.q, k, eps, &cfg.projection, &mut rng).stage("projection")?
    } else {
        // with a symmetric cache the columns already read are free rows
        let known: &[usize] = if cfg.symmetric_cache { &sf.full_columns } else { &[] };
        projection_to_lra_with_known(&access, &sf.q, k, eps, &cfg.projection, known, &mut rng).stage("projection")?
    };
    meter.mark(&access, "projection");
    let mut sizes = vec![
        ("k".to_string(), k as f64),
        ("eps".to_string(), eps),
        ("k_prime".to_string(), sf.k_prime as f64),
        ("t".to_string(), sf.t as f64),
        ("r_rows".to_string(), sf.r_shape.0 as f64),
        ("r_cols".to_string(), sf.r_shape.1 as f64),
        ("regression_columns".to_string(), sf.full_columns.len() as f64),
        ("sat_rows".to_string(), proj.sketch_shape.0 as f64),
        ("sat_cols".to_string(), proj.sketch_shape.1 as f64),
        ("final_regression_rows".to_string(), proj.regression_rows as f64),
    ];
    sizes.extend(cfg.constants());
    Ok(PipelineRun {
        factors: proj.factors,
        sf: SfProjection::new(sf.q, sf.k_prime.max(k), eps),
        queries_total: meter.total(),
        stages: meter.into_stages(),
        flags: sf.flags,
        sizes,
    })
}

/// Extends orthonormal `q` to `k` columns with random orthogonal directions.
pub(crate) fn pad_basis(q: &DenseMatrix, k: usize, rng: &mut Rng) -> DenseMatrix {
    let (n, have) = q.shape();
    if have >= k {
        return q.clone();
    }
    let g = gaussian_matrix(n, k - have, rng);
    let g = &g - q * (q.transpose() * &g);
    let mut full = DenseMatrix::zeros(n, k);
    full.columns_mut(0, have).copy_from(q);
    full.columns_mut(have, k - have).copy_from(&linalg::orthonormal_basis(&g));
    linalg::orthonormal_basis(&full)
}
