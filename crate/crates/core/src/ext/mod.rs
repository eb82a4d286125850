//! Applications built on the relative-error pipeline: squared-distance
//! matrices of negative type, and ridge regression from a low-rank coreset.

mod distance;
mod ridge;

pub use distance::{decompose_negative_type, negative_type_lra, NegativeTypeDecomposition, NegativeTypeRun};
pub use ridge::{ridge_coreset, ridge_objective, ridge_solve, RidgeCoreset, RidgeProblem};
