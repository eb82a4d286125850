//! `min_W ‖C − W Zᵀ‖₂` solved exactly and from a leverage-score sample of
//! the columns of C.

use psdlra::linalg::{self, DenseMatrix};
use psdlra::rng::{gaussian_matrix, stream};
use psdlra::specreg::{spectral_cost, spectral_opt_exact, spectral_reg_sketched, ColumnSource, SpecRegConfig};

fn main() -> psdlra::Result<()> {
    let (n, m, r) = (200, 2000, 6);
    let mut rng = stream(2, 0);
    let head = gaussian_matrix(n, r, &mut rng) * gaussian_matrix(r, m, &mut rng);
    let c: DenseMatrix = head + gaussian_matrix(n, m, &mut rng) * 0.05;
    let z = linalg::svd(&c)?.right_vectors(r);

    let (_, opt) = spectral_opt_exact(&c, &z)?;
    let reg = spectral_reg_sketched(&ColumnSource::Dense(&c), &z, r, 0.25, &SpecRegConfig::default(), &mut rng)?;
    let cost = spectral_cost(&c, &reg.w_hat, &z);
    println!("columns sampled {} of {m}", reg.sampler.indices().len());
    println!("optimum {opt:.4}, sketched {cost:.4}, ratio {:.4}", cost / opt);
    Ok(())
}
