//! Build a low-rank stand-in for A once, then solve many ridge regressions
//! `min ‖Ax − y‖² + λ‖x‖²` without another query.

use psdlra::ext::{ridge_coreset, ridge_objective, ridge_solve, RidgeProblem};
use psdlra::linalg::{self, Vector};
use psdlra::lra::PipelineConfig;
use psdlra::oracle::{EntryAccess, InstanceSpec};
use psdlra::reference::{dense_ridge_solve, exact_statdim};
use psdlra::rng::{gaussian_matrix, stream};

fn main() -> psdlra::Result<()> {
    let (n, eps) = (512, 0.5);
    let inst = InstanceSpec::random_psd(n, 5, 0.01, 17).generate()?;
    let a = inst.oracle.ground_truth();
    let sigma = linalg::spectral_norm(a);
    let lambda = 0.01 * sigma * sigma;
    let s_hat = exact_statdim(a, lambda)?;
    let problem = RidgeProblem::new(lambda, s_hat, eps);
    let coreset = ridge_coreset(&inst.oracle, &problem, &PipelineConfig::default(), 1)?;
    println!("statistical dimension {s_hat:.2}, coreset rank {}, queries {}", coreset.k, coreset.queries);

    let frozen = inst.oracle.queries();
    let mut rng = stream(5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let y = Vector::from_iterator(n, gaussian_matrix(n, 1, &mut rng).iter().copied());
        let x = ridge_solve(&coreset, &y, lambda)?;
        let best = dense_ridge_solve(a, &y, lambda)?;
        worst = worst.max(ridge_objective(a, &x, &y, lambda) / ridge_objective(a, &best, &y, lambda));
    }
    println!("worst objective ratio over 20 right-hand sides: {worst:.4}");
    println!("queries while solving: {}", inst.oracle.queries() - frozen);
    Ok(())
}
