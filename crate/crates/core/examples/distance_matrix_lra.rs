//! Squared Euclidean distance matrices are not PSD, but they are a PSD Gram
//! matrix plus a rank-two correction, which the solver exploits.

use psdlra::ext::negative_type_lra;
use psdlra::lra::PipelineConfig;
use psdlra::oracle::InstanceSpec;
use psdlra::reference::exact_lra_error;

fn main() -> psdlra::Result<()> {
    let (n, dim, k, eps) = (512, 20, 5, 0.3);
    let inst = InstanceSpec::negative_type(n, dim, k, 0.05, 2).generate()?;
    let truth = inst.oracle.ground_truth();
    let run = negative_type_lra(&inst.oracle, k, eps, &PipelineConfig::distance(), 8)?;
    let ratio = run.factors.error_sq(truth) / exact_lra_error(truth, k)?;
    println!("points in R^{dim}, n = {n}, k = {k}");
    println!("queries {} ({:.3} n^2)", run.queries_total, run.queries_total as f64 / (n * n) as f64);
    println!("error / opt {ratio:.4}, output rank <= {}", run.factors.rank_bound());
    for f in &run.flags {
        println!("note: {f}");
    }
    Ok(())
}
