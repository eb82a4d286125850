//! Rank-k approximation of a PSD matrix from a sublinear number of entries.
//!
//!     cargo run --release --example relative_error_lra -- 1024 5 0.25

use psdlra::lra::{sample_optimal_lra, sample_optimal_psd_output, PipelineConfig};
use psdlra::oracle::{EntryAccess, InstanceSpec};
use psdlra::reference::exact_lra_error;

fn main() -> psdlra::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n: usize = args.first().and_then(|s| s.parse().ok()).unwrap_or(1024);
    let k: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let eps: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.25);

    let inst = InstanceSpec::random_psd(n, k, 0.2, 11).generate()?;
    let truth = inst.oracle.ground_truth().clone();
    let opt = exact_lra_error(&truth, k)?;
    let cfg = PipelineConfig::default();

    let run = sample_optimal_lra(&inst.oracle, k, eps, &cfg, 3)?;
    println!("n = {n}, k = {k}, eps = {eps}");
    println!("queries       {} ({:.3} n^2)", run.queries_total, run.queries_total as f64 / (n * n) as f64);
    for (stage, q) in &run.stages {
        println!("  {stage:<20} {q}");
    }
    println!("error / opt   {:.4}", run.factors.error_sq(&truth) / opt);
    assert_eq!(inst.oracle.queries(), run.queries_total);

    inst.oracle.reset_queries();
    let psd = sample_optimal_psd_output(&inst.oracle, k, eps, &cfg, 3)?;
    println!("psd output: error / opt {:.4}, queries {}", psd.factors.error_sq(&truth) / opt, psd.queries_total);
    Ok(())
}
