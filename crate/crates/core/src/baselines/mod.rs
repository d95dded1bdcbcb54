//! Reference clusterers: k-means (k-means++ seeding, Lloyd) and EM for
//! isotropic and full-covariance Gaussian mixtures.

mod gmm;
mod kmeans;

pub use gmm::{em_gmm, Covariance, CovarianceKind, EmConfig, EmResult, GmmInit, GmmParams};
pub use kmeans::{assign, kmeans_pp_init, lloyd, KmeansResult};
