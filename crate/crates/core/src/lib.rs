//! Clustering with autoencoders derived from the Q-function of an isotropic
//! Gaussian mixture.
//!
//! The crate provides:
//!
//! * [`cm`]: the clustering module, a one-hidden-layer softmax autoencoder
//!   whose loss is the expanded Q-function (reconstruction, Gini sparsity,
//!   cross term, Dirichlet prior);
//! * [`aecm`]: a fully connected deep autoencoder with the clustering module
//!   nested at its bottleneck, trained jointly;
//! * [`baselines`]: k-means++ / Lloyd and EM for isotropic and full-covariance
//!   Gaussian mixtures;
//! * [`metrics`]: ARI, NMI, ACC (Hungarian matching) and homogeneity;
//! * [`data`]: CSV/IDX loaders, normalisation and synthetic generators;
//! * [`autodiff`] and [`tensor`]: the numeric substrate.
//!
//! Numeric types are generic over [`Scalar`] (`f32` or `f64`); `f64` is the
//! default type parameter everywhere and the aliases below name the common
//! instantiations.

pub mod aecm;
pub mod autodiff;
pub mod baselines;
pub mod cm;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model_io;
pub mod optim;
pub mod presets;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Matrix, Rng};

pub type Matrix64 = tensor::Matrix<f64>;
pub type Matrix32 = tensor::Matrix<f32>;
pub type Tape64 = autodiff::Tape<f64>;
pub type Tape32 = autodiff::Tape<f32>;
pub type CmParams64 = cm::CmParams<f64>;
pub type CmParams32 = cm::CmParams<f32>;
pub type AecmParams64 = aecm::AecmParams<f64>;
pub type AecmParams32 = aecm::AecmParams<f32>;
pub type GmmParams64 = baselines::GmmParams<f64>;
pub type Dataset64 = data::Dataset<f64>;
