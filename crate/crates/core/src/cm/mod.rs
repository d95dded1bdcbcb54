//! The clustering module: a softmax autoencoder whose decoder images of the
//! canonical basis are the cluster centroids.
//!
//! `Γ = softmax(X W_enc + B_enc)`, `X̃ = Γ W_dec + B_dec`, `μ_k = W_dec[k] + B_dec`.
//! The loss is the negated expansion of the isotropic mixture Q-function:
//!
//! | field     | formula                                 | sign in loss |
//! |-----------|-----------------------------------------|--------------|
//! | `e_rec`   | `Σ_i ‖x_i − x̃_i‖²`                     | `+`          |
//! | `e_gini`  | `Σ_i Σ_k γ_ik(1−γ_ik)‖μ_k‖²`            | `+`          |
//! | `e_cross` | `Σ_i Σ_{k≠l} γ_ik γ_il μ_kᵀμ_l`          | `−`          |
//! | `e_prior` | `Σ_k (1−α_k) log γ̃_k`                   | `+`          |
//!
//! In the ablation numbering these are E0..E3, in the derivation E1..E4.

mod loss;
mod train;

use serde::{Deserialize, Serialize};

pub use loss::{cm_loss, cm_loss_tape, CmLossBreakdown, CmTapeTerms, LossWeights, PriorMode, LOG_FLOOR};
pub(crate) use loss::{check_alpha, descending, prior_term};
pub(crate) use train::{divergence, fit_from};
pub use train::{train_cm, train_cm_with_hook, CmInit, CmTrainConfig, CmTrainResult};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, pseudo_inverse, row_softmax, sample_normal, sq_dist, Matrix, Rng};

/// Encoder and decoder of the clustering module for `d` inputs and `K` clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct CmParams<T = f64> {
    /// `d x K`
    pub w_enc: Matrix<T>,
    /// `1 x K`
    pub b_enc: Matrix<T>,
    /// `K x d`
    pub w_dec: Matrix<T>,
    /// `1 x d`
    pub b_dec: Matrix<T>,
}

/// Standard deviation of the random weight initialisation.
pub const RANDOM_INIT_STD: f64 = 0.01;

impl<T: Scalar> CmParams<T> {
    /// Weights `~ Normal(0, 0.01)`, biases zero.
    pub fn random(d: usize, k: usize, rng: &mut Rng) -> Self {
        CmParams {
            w_enc: sample_normal(rng, d, k, 0.0, RANDOM_INIT_STD),
            b_enc: Matrix::zeros(1, k),
            w_dec: sample_normal(rng, k, d, 0.0, RANDOM_INIT_STD),
            b_dec: Matrix::zeros(1, d),
        }
    }

    pub fn k(&self) -> usize {
        self.w_dec.rows()
    }

    pub fn d(&self) -> usize {
        self.w_dec.cols()
    }

    pub fn tensors(&self) -> [&Matrix<T>; 4] {
        [&self.w_enc, &self.b_enc, &self.w_dec, &self.b_dec]
    }

    pub fn tensors_mut(&mut self) -> [&mut Matrix<T>; 4] {
        [&mut self.w_enc, &mut self.b_enc, &mut self.w_dec, &mut self.b_dec]
    }

    fn check(&self) -> Result<()> {
        let (d, k) = self.w_enc.shape();
        if self.b_enc.shape() != (1, k) || self.w_dec.shape() != (k, d) || self.b_dec.shape() != (1, d) {
            return Err(Error::invalid(format!(
                "inconsistent CM shapes: w_enc {:?}, b_enc {:?}, w_dec {:?}, b_dec {:?}",
                self.w_enc.shape(),
                self.b_enc.shape(),
                self.w_dec.shape(),
                self.b_dec.shape()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CmForward<T = f64> {
    /// Responsibilities, `N x K`, rows on the simplex.
    pub gamma: Matrix<T>,
    /// Reconstructions, `N x d`.
    pub x_rec: Matrix<T>,
}

pub fn cm_forward<T: Scalar>(x: &Matrix<T>, p: &CmParams<T>) -> Result<CmForward<T>> {
    p.check()?;
    let logits = x.matmul(&p.w_enc)?.add_row_broadcast(&p.b_enc)?;
    let gamma = row_softmax(&logits)?;
    let x_rec = gamma.matmul(&p.w_dec)?.add_row_broadcast(&p.b_dec)?;
    Ok(CmForward { gamma, x_rec })
}

/// Hard cluster assignment (most responsible centroid) per row.
pub fn predict<T: Scalar>(x: &Matrix<T>, p: &CmParams<T>) -> Result<Vec<usize>> {
    Ok(cm_forward(x, p)?.gamma.argmax_rows())
}

/// Centroids `μ_k = W_dec[k] + B_dec`, `K x d`.
pub fn extract_centroids<T: Scalar>(p: &CmParams<T>) -> Matrix<T> {
    p.w_dec
        .add_row_broadcast(&p.b_dec)
        .expect("decoder weight and bias widths agree")
}

/// Parameters whose decoder images are `centroids`.
///
/// With `K ≤ d` the encoder is the pseudo-inverse of the centroid matrix and
/// both biases are zero, so `Enc(μ_j)` peaks at `j`. With `K > d` no linear
/// map can invert the centroids; the encoder then scores `2 xᵀμ_k − ‖μ_k‖²`,
/// the responsibilities of the isotropic mixture with covariance `½ I`,
/// which still sends every centroid to its own cluster.
pub fn cm_init_from_centroids<T: Scalar>(centroids: &Matrix<T>) -> Result<CmParams<T>> {
    let (k, d) = centroids.shape();
    let (w_enc, b_enc) = if k <= d {
        (pseudo_inverse(centroids)?, Matrix::zeros(1, k))
    } else {
        let w = centroids.transpose().scale(T::of(2.0));
        let b = Matrix::from_fn(1, k, |_, j| -dot(centroids.row(j), centroids.row(j)));
        (w, b)
    };
    Ok(CmParams {
        w_enc,
        b_enc,
        w_dec: centroids.clone(),
        b_dec: Matrix::zeros(1, d),
    })
}

/// How the two sparsity terms are combined into the selection score.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LspMode {
    /// `e_gini + e_cross`.
    #[default]
    Sum,
    /// `e_gini − e_cross`, the contribution of both terms to the loss.
    Signed,
}

/// Sparsity score of a fitted module over the whole dataset; lower means
/// less ambiguous assignments.
pub fn l_sp<T: Scalar>(x: &Matrix<T>, p: &CmParams<T>, mode: LspMode) -> Result<T> {
    let f = cm_forward(x, p)?;
    let alpha = vec![1.0; p.k()];
    let b = cm_loss(x, &f.gamma, &f.x_rec, p, &alpha, PriorMode::Symmetric)?;
    Ok(match mode {
        LspMode::Sum => b.e_gini + b.e_cross,
        LspMode::Signed => b.e_gini - b.e_cross,
    })
}

/// `|Σ_k γ_k‖x−μ_k‖² − (‖x−x̃‖² + Σ_k γ_k(1−γ_k)‖μ_k‖² − Σ_{k≠l} γ_kγ_l μ_kᵀμ_l)|`
/// with `x̃ = Σ_k γ_k μ_k`.
pub fn q_expansion_identity_check<T: Scalar>(x: &[T], gamma: &[T], mu: &Matrix<T>) -> T {
    let (k, d) = mu.shape();
    let lhs: T = (0..k).map(|c| gamma[c] * sq_dist(x, mu.row(c))).sum();
    let mut x_rec = vec![T::zero(); d];
    for c in 0..k {
        for (r, &m) in x_rec.iter_mut().zip(mu.row(c)) {
            *r += gamma[c] * m;
        }
    }
    let mut rhs = sq_dist(x, &x_rec);
    for a in 0..k {
        rhs += gamma[a] * (T::one() - gamma[a]) * dot(mu.row(a), mu.row(a));
        for b in 0..k {
            if a != b {
                rhs -= gamma[a] * gamma[b] * dot(mu.row(a), mu.row(b));
            }
        }
    }
    (lhs - rhs).abs()
}
