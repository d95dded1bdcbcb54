//! Dense matrices, stable special functions, seeded sampling and the
//! pseudo-inverse used to initialise the clustering module.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{pseudo_inverse, standardize, Standardized};
pub use matrix::{row_softmax, Matrix};
pub(crate) use matrix::{dot, sq_dist};
pub use rng::{sample_normal, sample_uniform, Rng};
