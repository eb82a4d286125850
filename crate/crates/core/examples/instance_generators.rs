//! Every instance family, generated from a seed and round-tripped through its
//! text form.

use psdlra::linalg;
use psdlra::oracle::{Corruption, InstanceSpec, RobustSplit};

fn main() -> psdlra::Result<()> {
    let specs = [
        InstanceSpec::random_psd(200, 4, 0.2, 1),
        InstanceSpec::correlation(200, 4, 0.2, 0.05, Corruption::Dense, 1),
        InstanceSpec::negative_type(200, 10, 4, 0.05, 1),
        InstanceSpec::mw_blocks(200, 4, 0.25, 1),
        InstanceSpec::robust_mu(200, 0.3, 0.04, 3, RobustSplit::NormMatched, 1),
        InstanceSpec::robust_nu(200, 0.3, 0.04, 3, 1),
        InstanceSpec::ridge_hard(200, 8.0, 0.5, 1),
    ];
    for spec in specs {
        let text = spec.to_kv();
        assert_eq!(InstanceSpec::from_kv(&text)?, spec);
        let inst = spec.generate()?;
        let a = inst.oracle.ground_truth();
        println!(
            "{:<14} ‖A‖_F² {:>12.2}  phi_max {:>6.2}  {}",
            spec.family.name(),
            linalg::frobenius_sq(a),
            inst.meta.phi_max,
            text.trim().replace('\n', " ")
        );
    }
    Ok(())
}
