//! Correlation matrices: the diagonal is known to be 1 and is never read.

use psdlra::oracle::{Corruption, EntryAccess, InstanceSpec};
use psdlra::reference::exact_lra_error;
use psdlra::report::ErrorMetrics;
use psdlra::robust::correlation_lra;

fn main() -> psdlra::Result<()> {
    let (n, k, eps, eta) = (800, 4, 0.3, 0.02);
    let inst = InstanceSpec::correlation(n, k, 0.2, eta, Corruption::Dense, 21).generate()?;
    let truth = inst.oracle.ground_truth();
    let run = correlation_lra(&inst.oracle, k, eps, eta, 4)?;
    let m = ErrorMetrics::of(&run.factors, truth, exact_lra_error(truth, k)?);
    println!("queries {} of {}", inst.oracle.queries(), n * n);
    for (stage, q) in &run.stages {
        println!("  {stage:<14} {q}");
    }
    println!("‖A - B‖² / ‖A‖² - opt / ‖A‖² = {:.4}", m.additive_ratio);
    Ok(())
}
