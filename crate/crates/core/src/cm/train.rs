use serde::{Deserialize, Serialize};

use super::loss::{check_alpha, cm_loss_tape, CmLossBreakdown, LossWeights, PriorMode};
use super::{cm_init_from_centroids, CmParams};
use crate::autodiff::Tape;
use crate::baselines::kmeans_pp_init;
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Rng};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CmInit {
    Random,
    /// Decoder set to k-means++ seeds, encoder to their pseudo-inverse.
    #[default]
    KmeansPlusPlus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmTrainConfig {
    /// Dirichlet concentration, one entry per cluster.
    pub alpha: Vec<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub init: CmInit,
    pub prior_mode: PriorMode,
    pub weights: LossWeights,
    /// Run the final centroid-averaging epoch.
    pub averaging: bool,
}

impl CmTrainConfig {
    /// Adam at `1e-3`, batch 20, 50 epochs, k-means++ init, symmetric prior `α·1_K`.
    pub fn new(k: usize, alpha: f64) -> Self {
        CmTrainConfig {
            alpha: vec![alpha; k],
            batch_size: 20,
            epochs: 50,
            lr: 1e-3,
            optimizer: OptimizerKind::adam(),
            seed: 0,
            init: CmInit::KmeansPlusPlus,
            prior_mode: PriorMode::Symmetric,
            weights: LossWeights::default(),
            averaging: true,
        }
    }

    pub(crate) fn validate(&self, n: usize, k: usize) -> Result<()> {
        check_alpha(&self.alpha, k)?;
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::invalid(format!("batch size {} outside 1..={n}", self.batch_size)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CmTrainResult<T = f64> {
    pub params: CmParams<T>,
    /// Loss terms summed over the batches of every epoch.
    pub history: Vec<CmLossBreakdown<T>>,
}

/// Initial parameters for `x` under `init`; k-means++ falls back to random
/// weights when the seeds are rank deficient.
pub(crate) fn initial_params<T: Scalar>(x: &Matrix<T>, k: usize, init: CmInit, rng: &mut Rng) -> Result<CmParams<T>> {
    match init {
        CmInit::Random => Ok(CmParams::random(x.cols(), k, rng)),
        CmInit::KmeansPlusPlus => {
            let seeds = kmeans_pp_init(x, k, rng)?;
            match cm_init_from_centroids(&seeds) {
                Ok(p) => Ok(p),
                Err(Error::Singular(msg)) => {
                    log::warn!("k-means++ seeds are rank deficient ({msg}); using random init");
                    Ok(CmParams::random(x.cols(), k, rng))
                }
                Err(e) => Err(e),
            }
        }
    }
}

/// Gradients of the weighted loss on one batch, plus its breakdown.
pub(crate) fn batch_gradients<T: Scalar>(
    xb: &Matrix<T>,
    p: &CmParams<T>,
    config: &CmTrainConfig,
) -> Result<(Vec<Matrix<T>>, CmLossBreakdown<T>)> {
    let mut tape = Tape::new();
    let xv = tape.constant(xb.clone());
    let vars = p.tensors().map(|m| tape.param(m.clone()));
    let terms = cm_loss_tape(&mut tape, xv, vars, &config.alpha, config.prior_mode, &config.weights)?;
    let breakdown = terms.breakdown(&tape);
    let grads = tape.backward(terms.objective)?;
    Ok((vars.iter().map(|&v| grads.wrt(v)).collect(), breakdown))
}

pub(crate) fn divergence(epoch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { context } => Error::Divergence { epoch, term: context },
        other => other,
    }
}

pub fn train_cm<T: Scalar>(x: &Matrix<T>, k: usize, config: &CmTrainConfig) -> Result<CmTrainResult<T>> {
    train_cm_with_hook(x, k, config, |_, _, _| {})
}

/// [`train_cm`] calling `hook(epoch, params, epoch_breakdown)` after every epoch.
pub fn train_cm_with_hook<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    config: &CmTrainConfig,
    mut hook: impl FnMut(usize, &CmParams<T>, &CmLossBreakdown<T>),
) -> Result<CmTrainResult<T>> {
    let n = x.rows();
    config.validate(n, k)?;
    let mut rng = Rng::new(config.seed);
    let params = initial_params(x, k, config.init, &mut rng)?;
    fit_from(x, params, config, &mut rng, &mut hook)
}

/// Trains from given parameters with an already seeded generator.
pub(crate) fn fit_from<T: Scalar>(
    x: &Matrix<T>,
    mut p: CmParams<T>,
    config: &CmTrainConfig,
    rng: &mut Rng,
    hook: &mut dyn FnMut(usize, &CmParams<T>, &CmLossBreakdown<T>),
) -> Result<CmTrainResult<T>> {
    let n = x.rows();
    config.validate(n, p.k())?;
    let mut opt = Optimizer::new(config.optimizer, config.lr, &p.tensors());
    let mut history = Vec::with_capacity(config.epochs);
    let all = [true; 4];

    for epoch in 0..config.epochs {
        let order = rng.permutation(n);
        let mut acc = CmLossBreakdown::default();
        for batch in order.chunks(config.batch_size) {
            let xb = x.select_rows(batch);
            let (grads, b) = batch_gradients(&xb, &p, config).map_err(|e| divergence(epoch, e))?;
            opt.step(&mut p.tensors_mut(), &grads, &all);
            acc += b;
        }
        if let Some(term) = acc.non_finite_term() {
            return Err(Error::Divergence {
                epoch,
                term: term.into(),
            });
        }
        if p.tensors().iter().any(|m| !m.is_finite()) {
            return Err(Error::Divergence {
                epoch,
                term: "parameters".into(),
            });
        }
        hook(epoch, &p, &acc);
        history.push(acc);
    }

    if config.averaging {
        average_decoder(x, &mut p, config, &mut opt, rng)?;
    }
    Ok(CmTrainResult { params: p, history })
}

/// One extra epoch in which only the decoder keeps moving; the decoder is
/// replaced by the mean of its per-iteration snapshots.
pub(crate) fn average_decoder<T: Scalar>(
    x: &Matrix<T>,
    p: &mut CmParams<T>,
    config: &CmTrainConfig,
    opt: &mut Optimizer<T>,
    rng: &mut Rng,
) -> Result<()> {
    let n = x.rows();
    let epoch = config.epochs;
    let order = rng.permutation(n);
    let mut w_sum = Matrix::zeros(p.k(), p.d());
    let mut b_sum = Matrix::zeros(1, p.d());
    let mut count = 0usize;
    for batch in order.chunks(config.batch_size) {
        let xb = x.select_rows(batch);
        let (grads, _) = batch_gradients(&xb, p, config).map_err(|e| divergence(epoch, e))?;
        opt.step(&mut p.tensors_mut(), &grads, &[false, false, true, true]);
        w_sum.axpy(T::one(), &p.w_dec)?;
        b_sum.axpy(T::one(), &p.b_dec)?;
        count += 1;
    }
    let inv = T::one() / T::of_usize(count.max(1));
    p.w_dec = w_sum.scale(inv);
    p.b_dec = b_sum.scale(inv);
    if !p.w_dec.is_finite() || !p.b_dec.is_finite() {
        return Err(Error::Divergence {
            epoch,
            term: "averaged centroids".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cm::{cm_forward, extract_centroids};
    use crate::tensor::sample_normal;

    #[test]
    fn averaging_keeps_encoder() {
        let mut rng = Rng::new(3);
        let x: Matrix = sample_normal(&mut rng, 60, 2, 0.0, 1.0);
        let mut config = CmTrainConfig::new(3, 2.0);
        config.epochs = 2;
        config.averaging = false;
        let before = train_cm(&x, 3, &config).unwrap().params;
        config.averaging = true;
        let after = train_cm(&x, 3, &config).unwrap().params;
        assert_eq!(before.w_enc, after.w_enc);
        assert_eq!(before.b_enc, after.b_enc);
        assert_ne!(before.w_dec, after.w_dec);
    }

    #[test]
    fn single_cluster_reconstructs_mean() {
        let mut rng = Rng::new(5);
        let x: Matrix = sample_normal(&mut rng, 100, 2, 3.0, 1.0);
        let mut config = CmTrainConfig::new(1, 1.0);
        config.epochs = 40;
        config.lr = 0.05;
        let r = train_cm(&x, 1, &config).unwrap();
        let mean = x.col_means();
        let mu = extract_centroids(&r.params);
        assert!(mu.max_abs_diff(&mean).unwrap() < 0.15, "{mu:?} vs {mean:?}");
        let f = cm_forward(&x, &r.params).unwrap();
        assert!(f.gamma.as_slice().iter().all(|&g| g == 1.0));
    }

    #[test]
    fn invalid_configs() {
        let x: Matrix = Matrix::zeros(4, 2);
        let mut c = CmTrainConfig::new(2, 1.0);
        c.batch_size = 5;
        assert!(train_cm(&x, 2, &c).is_err());
        let c = CmTrainConfig::new(3, 1.0);
        assert!(train_cm(&x, 2, &c).is_err());
    }

    #[test]
    fn deterministic_under_seed() {
        let mut rng = Rng::new(8);
        let x: Matrix = sample_normal(&mut rng, 40, 2, 0.0, 1.0);
        let mut c = CmTrainConfig::new(2, 2.0);
        c.epochs = 3;
        let a = train_cm(&x, 2, &c).unwrap();
        let b = train_cm(&x, 2, &c).unwrap();
        assert_eq!(a.params, b.params);
    }
}
