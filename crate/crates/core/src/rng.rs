//! Deterministic random streams.
//!
//! Every stochastic choice in the crate draws from a ChaCha stream keyed by a
//! single 64-bit master seed and a stream label, so runs replay bit-exactly
//! and independent stages never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::DenseMatrix;

pub type Rng = ChaCha8Rng;

/// Stream labels used by the pipelines. Kept in one place so that two stages
/// never collide on a label.
pub mod streams {
    pub const INSTANCE: u64 = 1;
    pub const RIDGE_SCORES: u64 = 10;
    pub const COLUMN_PCP: u64 = 11;
    pub const ROW_PCP: u64 = 12;
    pub const SPECTRAL_LRA: u64 = 13;
    pub const SPECTRAL_REGRESSION: u64 = 14;
    pub const PROJECTION_ROWS: u64 = 15;
    pub const PROJECTION_COLS: u64 = 16;
    pub const PROJECTION_REGRESSION: u64 = 17;
    pub const FROBENIUS: u64 = 20;
    pub const FKV: u64 = 21;
    pub const LIFT_COLUMNS: u64 = 22;
    pub const LIFT_ROWS: u64 = 23;
    pub const VERIFY: u64 = 30;
    pub const TRIAL: u64 = 40;
}

/// Random stream `stream` derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for trial `index` of a sweep rooted at `seed`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `count` distinct indices drawn uniformly from `0..n`, in increasing order.
pub fn distinct_subset(n: usize, count: usize, rng: &mut Rng) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, n, count.min(n)).into_vec();
    picked.sort_unstable();
    picked
}
