//! Additive-error approximation when the diagonal has been shrunk by an
//! adversary and a few entries are corrupted.

use psdlra::oracle::{InstanceSpec, RobustSplit};
use psdlra::reference::exact_lra_error;
use psdlra::report::ErrorMetrics;
use psdlra::robust::{robust_lra, RobustConfig};

fn main() -> psdlra::Result<()> {
    let (n, k, eps, eta) = (1000, 3, 0.3, 0.04);
    for split in [RobustSplit::RankOneBlock, RobustSplit::NormMatched] {
        let inst = InstanceSpec::robust_mu(n, eps, eta, k, split, 5).generate()?;
        let truth = inst.oracle.ground_truth();
        let cfg = RobustConfig::new(k, eps, eta, inst.meta.phi_max.max(1.0));
        let run = robust_lra(&inst.oracle, &cfg, 9)?;
        let m = ErrorMetrics::of(&run.factors, truth, exact_lra_error(truth, k)?);
        println!(
            "{:<15} phi_max {:>7.1}  queries {:>8} ({:.3} n^2)  additive {:.4}  bound {:.4}",
            split.name(),
            cfg.phi_max,
            run.queries_total,
            run.queries_total as f64 / (n * n) as f64,
            m.additive_ratio,
            3.0 * (eps + eta.sqrt())
        );
    }
    Ok(())
}
