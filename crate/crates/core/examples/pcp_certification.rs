//! Projection-cost-preserving column sketches, checked against the full
//! matrix on random rank-k projections.

use psdlra::oracle::InstanceSpec;
use psdlra::pcp::{column_pcp_ridge, ridge_pcp_size, row_pcp_ridge, verify_pcp};
use psdlra::rng::{stream, streams};
use psdlra::scores::approx_ridge_sqrt;

fn main() -> psdlra::Result<()> {
    let (n, k, eps) = (256, 3, 0.5);
    let inst = InstanceSpec::random_psd(n, k, 0.3, 7).generate()?;
    let o = &inst.oracle;
    let mut rng = stream(1, streams::VERIFY);
    let scores = approx_ridge_sqrt(o, k, &Default::default(), &mut rng)?.values;
    let t = ridge_pcp_size(n, k, eps, 4.0);
    let col = column_pcp_ridge(n, &scores, k, eps, t, &mut rng)?;
    let row = row_pcp_ridge(&col, o, &scores, k, eps, t, &mut rng)?;
    for (name, sketch) in [("column", &col), ("row", &row)] {
        let rep = verify_pcp(sketch, &o.observed(), o.ground_truth(), 100, &mut rng)?;
        println!(
            "{name:<7} width {:>4}  checked {}  violations {}  worst relative {:.3}",
            sketch.width(),
            rep.checked,
            rep.violations,
            rep.worst_relative
        );
    }
    Ok(())
}
