//! Sublinear-query low-rank approximation of PSD, correlation and
//! negative-type distance matrices.

pub mod acceptance;
pub mod cli;
pub mod error;
pub mod ext;
pub mod harness;
pub mod linalg;
pub mod lra;
pub mod oracle;
pub mod pcp;
pub mod reference;
pub mod report;
pub mod rng;
pub mod robust;
pub mod sampling;
pub mod scores;
pub mod specreg;

pub use error::{Error, Result};
