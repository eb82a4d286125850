//! Command-line front end. `run` returns the process exit code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::acceptance::{run_criterion, Outcome, CRITERIA};
use crate::error::{Error, Result};
use crate::harness::{run_trial, verify_report, Trial};
use crate::linalg::{self, write_matrix};
use crate::oracle::{Corruption, Family, InstanceSpec, RobustSplit};
use crate::pcp::{
    column_pcp_diagonal, column_pcp_ridge, diagonal_pcp_size, ridge_pcp_size, row_pcp_diagonal, row_pcp_ridge,
    verify_pcp,
};
use crate::report::{reports_from_json, reports_to_json, write_csv, Algorithm, RunReport};
use crate::rng::{stream, streams, trial_seed};
use crate::scores::approx_ridge_sqrt;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

const CSV_HELP: &str = "CSV columns (one row per trial, fixed order): trial, seed, algorithm, family, n, k, eps, eta, \
queries_total, queries_over_n2, frobenius_sq_error, optimum, relative_ratio, additive_ratio, passed. \
Wall time is not written, so identical arguments give byte-identical files.";

#[derive(Parser, Debug)]
#[command(name = "psdlra", version, about = "Sublinear-query low-rank approximation harness", after_help = CSV_HELP)]
struct Cli {
    /// Worker threads for independent trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and write the matrix the algorithms would see.
    Gen(GenArgs),
    /// Relative-error rank-k approximation of a PSD matrix.
    Lra(RunArgs),
    /// Additive-error approximation of a corrupted PSD matrix.
    Robust(RunArgs),
    /// Additive-error approximation of a corrupted correlation matrix.
    Corr(RunArgs),
    /// Rank-k approximation of a negative-type distance matrix.
    Dist(RunArgs),
    /// Ridge-regression coreset, checked against exact solves.
    Ridge(RunArgs),
    /// Certify a PCP construction against ground truth.
    VerifyPcp(PcpArgs),
    /// Repeat an algorithm over a list of values of one parameter.
    Sweep(SweepArgs),
    /// Run the acceptance suite.
    Accept(AcceptArgs),
    /// Re-run the trials recorded in a JSON report and compare.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct InstanceArgs {
    #[arg(long, value_parser = parse_family)]
    family: Option<Family>,
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    /// random_psd and correlation: tail-to-head energy ratio.
    #[arg(long, default_value_t = 0.2)]
    tail: f64,
    /// negative_type: ambient dimension.
    #[arg(long, default_value_t = 20)]
    dim: usize,
    /// negative_type: off-subspace noise.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// ridge_hard: statistical-dimension target.
    #[arg(long, default_value_t = 1.0)]
    s_lambda: f64,
    #[arg(long, value_parser = parse_split, default_value = "norm_matched")]
    split: RobustSplit,
    #[arg(long, value_parser = parse_corruption, default_value = "none")]
    corruption: Corruption,
    /// Root seed (falls back to PSDLRA_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long)]
    out: PathBuf,
    /// Also write the clean matrix here.
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    /// JSON report (one object, or an array for several trials).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// lra: output M·Mᵀ, PSD by construction.
    #[arg(long)]
    psd_output: bool,
    /// robust: override the instance's φ_max.
    #[arg(long)]
    phi_max: Option<f64>,
    /// robust: total query cap.
    #[arg(long)]
    budget: Option<u64>,
    /// ridge: λ as a multiple of σ₁(A)².
    #[arg(long, default_value_t = 0.01)]
    lambda_scale: f64,
    /// ridge: right-hand sides per trial.
    #[arg(long, default_value_t = 100)]
    right_hand_sides: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Construction {
    RidgeColumn,
    RidgeRow,
    DiagonalColumn,
    DiagonalRow,
}

#[derive(Args, Debug)]
struct PcpArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long, value_enum)]
    construction: Construction,
    /// Seeds to certify.
    #[arg(long, default_value_t = 20)]
    trials: u64,
    /// Random rank-k projections per seed (the top-k projector is added).
    #[arg(long, default_value_t = 100)]
    projections: usize,
    /// Oversampling constant of the sketch size.
    #[arg(long)]
    constant: Option<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepAlgorithm {
    Lra,
    PsdOutput,
    Robust,
    Corr,
    Dist,
    Ridge,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SweepParam {
    N,
    K,
    Eps,
    Eta,
    Tail,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    inst: InstanceArgs,
    #[arg(long, value_enum)]
    algorithm: SweepAlgorithm,
    #[arg(long, value_enum)]
    param: SweepParam,
    /// Comma-separated values of the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    trials: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AcceptArgs {
    #[arg(long, default_value = "primary", value_parser = ["primary"])]
    suite: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated criterion numbers (default: all).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    /// Write outcomes and their metrics as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    report: PathBuf,
    /// Relative tolerance on the error metrics.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

fn parse_family(s: &str) -> std::result::Result<Family, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<RobustSplit, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_corruption(s: &str) -> std::result::Result<Corruption, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn env_seed() -> u64 {
    std::env::var("PSDLRA_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(0)
}

impl InstanceArgs {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or_else(env_seed)
    }

    fn spec(&self, default: Family) -> InstanceSpec {
        let family = self.family.unwrap_or(default);
        let seed = self.seed();
        let mut spec = match family {
            Family::RandomPsd => InstanceSpec::random_psd(self.n, self.k, self.tail, seed),
            Family::Correlation => InstanceSpec::correlation(self.n, self.k, self.tail, self.eta, self.corruption, seed),
            Family::NegativeType => InstanceSpec::negative_type(self.n, self.dim, self.k, self.noise, seed),
            Family::MwBlocks => InstanceSpec::mw_blocks(self.n, self.k, self.eps, seed),
            Family::RobustMu => InstanceSpec::robust_mu(self.n, self.eps, self.eta, self.k, self.split, seed),
            Family::RobustNu => InstanceSpec::robust_nu(self.n, self.eps, self.eta, self.k, seed),
            Family::RidgeHard => InstanceSpec::ridge_hard(self.n, self.s_lambda, self.eps, seed),
        };
        spec.eps = self.eps;
        spec.eta = self.eta;
        spec
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Lra(a) => {
            let alg = if a.psd_output { Algorithm::PsdOutput } else { Algorithm::RelativeLra };
            trials(a, alg, Family::RandomPsd)
        }
        Command::Robust(a) => trials(a, Algorithm::Robust, Family::RobustNu),
        Command::Corr(a) => trials(a, Algorithm::Correlation, Family::Correlation),
        Command::Dist(a) => trials(a, Algorithm::Distance, Family::NegativeType),
        Command::Ridge(a) => trials(a, Algorithm::Ridge, Family::RandomPsd),
        Command::VerifyPcp(a) => pcp(a),
        Command::Sweep(a) => sweep(a),
        Command::Accept(a) => accept(a),
        Command::Verify(a) => verify(a),
    }
}

fn gen(a: GenArgs) -> Result<i32> {
    let inst = a.inst.spec(Family::RandomPsd).generate()?;
    let observed = inst.oracle.observed();
    write_matrix(&a.out, &observed)?;
    if let Some(p) = &a.truth_out {
        write_matrix(p, inst.oracle.ground_truth())?;
    }
    println!(
        "{} n={} frobenius_sq={} clean_frobenius_sq={} phi_max={}",
        inst.spec.family,
        inst.spec.n,
        linalg::frobenius_sq(&observed),
        linalg::frobenius_sq(inst.oracle.ground_truth()),
        inst.meta.phi_max
    );
    for note in &inst.meta.notes {
        println!("note: {note}");
    }
    Ok(EXIT_OK)
}

fn base_trial(a: &RunArgs, alg: Algorithm, default: Family) -> Trial {
    let mut t = Trial::new(alg, a.inst.spec(default), a.inst.k, a.inst.eps, a.inst.seed());
    t.phi_max = a.phi_max;
    t.budget = a.budget;
    t.lambda_scale = a.lambda_scale;
    t.right_hand_sides = a.right_hand_sides;
    t
}

fn run_many(base: &Trial, seed: u64, count: u64) -> Result<Vec<RunReport>> {
    (0..count)
        .into_par_iter()
        .map(|i| run_trial(&base.nth(seed, i)))
        .collect()
}

fn emit(reports: &[RunReport], out: Option<&PathBuf>, csv: Option<&PathBuf>) -> Result<()> {
    if let Some(p) = out {
        let mut w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut w, &reports_to_json(reports)).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w)?;
    }
    if let Some(p) = csv {
        write_csv(BufWriter::new(File::create(p)?), reports)?;
    }
    Ok(())
}

fn print_summary(reports: &[RunReport]) {
    for r in reports {
        let n2 = (r.spec.n as f64).powi(2);
        println!(
            "trial {:>3} {} {} n={} queries={} ({:.3}n^2) relative_ratio={:.4} additive_ratio={:.4} {}",
            r.trial,
            r.algorithm,
            r.spec.family,
            r.spec.n,
            r.queries_total,
            r.queries_total as f64 / n2,
            r.metrics.relative_ratio,
            r.metrics.additive_ratio,
            if r.passed { "ok" } else { "miss" }
        );
    }
    let hits = reports.iter().filter(|r| r.passed).count();
    println!("{hits}/{} trials met the guarantee", reports.len());
}

fn trials(a: RunArgs, alg: Algorithm, default: Family) -> Result<i32> {
    let base = base_trial(&a, alg, default);
    let reports = run_many(&base, a.inst.seed(), a.trials)?;
    emit(&reports, a.out.as_ref(), a.csv.as_ref())?;
    print_summary(&reports);
    Ok(EXIT_OK)
}

fn sweep(a: SweepArgs) -> Result<i32> {
    let (alg, family) = match a.algorithm {
        SweepAlgorithm::Lra => (Algorithm::RelativeLra, Family::RandomPsd),
        SweepAlgorithm::PsdOutput => (Algorithm::PsdOutput, Family::RandomPsd),
        SweepAlgorithm::Robust => (Algorithm::Robust, Family::RobustNu),
        SweepAlgorithm::Corr => (Algorithm::Correlation, Family::Correlation),
        SweepAlgorithm::Dist => (Algorithm::Distance, Family::NegativeType),
        SweepAlgorithm::Ridge => (Algorithm::Ridge, Family::RandomPsd),
    };
    let mut all = Vec::new();
    for (v_idx, &v) in a.values.iter().enumerate() {
        let mut inst = a.inst.clone();
        match a.param {
            SweepParam::N => inst.n = v as usize,
            SweepParam::K => inst.k = v as usize,
            SweepParam::Eps => inst.eps = v,
            SweepParam::Eta => inst.eta = v,
            SweepParam::Tail => inst.tail = v,
        }
        let base = Trial::new(alg, inst.spec(family), inst.k, inst.eps, inst.seed());
        let mut reports = run_many(&base, trial_seed(inst.seed(), v_idx as u64), a.trials)?;
        let mut q: Vec<f64> = reports.iter().map(|r| r.queries_total as f64).collect();
        q.sort_by(f64::total_cmp);
        let hits = reports.iter().filter(|r| r.passed).count();
        println!(
            "{:?}={v} median_queries={} ({:.3}n^2) passed={hits}/{}",
            a.param,
            q[q.len() / 2],
            q[q.len() / 2] / (inst.n as f64).powi(2),
            reports.len()
        );
        for r in reports.iter_mut() {
            r.trial += v_idx as u64 * a.trials;
        }
        all.extend(reports);
    }
    emit(&all, a.out.as_ref(), a.csv.as_ref())?;
    Ok(EXIT_OK)
}

fn pcp(a: PcpArgs) -> Result<i32> {
    let (k, eps, eta, n) = (a.inst.k, a.inst.eps, a.inst.eta, a.inst.n);
    let ridge = matches!(a.construction, Construction::RidgeColumn | Construction::RidgeRow);
    let default_family = if ridge { Family::RandomPsd } else { Family::Correlation };
    let base = a.inst.spec(default_family);
    let seed = a.inst.seed();
    let results: Vec<Result<(bool, f64)>> = (0..a.trials)
        .into_par_iter()
        .map(|s| {
            let inst = base.with_seed(trial_seed(seed, 2 * s)).generate()?;
            let o = &inst.oracle;
            let mut rng = stream(trial_seed(seed, 2 * s + 1), streams::VERIFY);
            let sketch = if ridge {
                let scores = approx_ridge_sqrt(o, k, &Default::default(), &mut rng)?.values;
                let t = ridge_pcp_size(n, k, eps, a.constant.unwrap_or(crate::acceptance::C3));
                let col = column_pcp_ridge(n, &scores, k, eps, t, &mut rng)?;
                if a.construction == Construction::RidgeRow {
                    row_pcp_ridge(&col, o, &scores, k, eps, t, &mut rng)?
                } else {
                    col
                }
            } else {
                let diag: Vec<f64> = crate::oracle::EntryAccess::diagonal(o)?.iter().copied().collect();
                let t = diagonal_pcp_size(n, k, eps, inst.meta.phi_max.max(1.0), a.constant.unwrap_or(crate::acceptance::C4));
                let col = column_pcp_diagonal(&diag, k, eps, eta, t, &mut rng)?;
                if a.construction == Construction::DiagonalRow {
                    row_pcp_diagonal(&col, o, &diag, k, eps, eta, t, &mut rng)?
                } else {
                    col
                }
            };
            let rep = verify_pcp(&sketch, &o.observed(), o.ground_truth(), a.projections, &mut rng)?;
            Ok((rep.passed(), rep.max_violation))
        })
        .collect();
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    for (s, (ok, v)) in results.iter().enumerate() {
        println!("seed {s:>3} {} max_violation={v:.3e}", if *ok { "clean" } else { "violated" });
    }
    let clean = results.iter().filter(|r| r.0).count();
    println!("{clean}/{} seeds without violations", results.len());
    Ok(EXIT_OK)
}

fn accept(a: AcceptArgs) -> Result<i32> {
    let seed = a.seed.unwrap_or_else(env_seed);
    let ids: Vec<u8> = if a.only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { a.only.clone() };
    let mut outcomes: Vec<Outcome> = Vec::new();
    let stdout = io::stdout();
    for id in ids {
        let o = run_criterion(id, seed).ok_or_else(|| Error::InvalidInput(format!("no criterion {id}")))?;
        writeln!(stdout.lock(), "{}", o.line())?;
        outcomes.push(o);
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if let Some(p) = &a.out {
        let v: Vec<serde_json::Value> = outcomes
            .iter()
            .map(|o| {
                let mut m = serde_json::Map::new();
                m.insert("criterion".into(), o.id.into());
                m.insert("name".into(), o.name.into());
                m.insert("passed".into(), o.passed.into());
                m.insert("summary".into(), o.summary.clone().into());
                m.insert("seconds".into(), o.seconds.into());
                for (k, x) in &o.metrics {
                    m.insert(format!("metric_{k}"), if x.is_finite() { (*x).into() } else { x.to_string().into() });
                }
                serde_json::Value::Object(m)
            })
            .collect();
        let mut w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(&mut w, &v).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w)?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VIOLATION })
}

fn verify(a: VerifyArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&a.report)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
    let reports = reports_from_json(&value)?;
    let checks: Vec<Result<(u64, Vec<String>)>> = reports
        .par_iter()
        .map(|r| verify_report(r, a.tol).map(|(_, d)| (r.trial, d)))
        .collect();
    let mut bad = 0;
    for c in checks {
        let (trial, diffs) = c?;
        if diffs.is_empty() {
            println!("trial {trial}: reproduced");
        } else {
            bad += 1;
            println!("trial {trial}: {}", diffs.join("; "));
        }
    }
    println!("{}/{} reports reproduced", reports.len() - bad, reports.len());
    Ok(if bad == 0 { EXIT_OK } else { EXIT_VIOLATION })
}
