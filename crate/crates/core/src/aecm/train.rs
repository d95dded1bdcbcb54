use serde::{Deserialize, Serialize};

use super::loss::{aecm_loss_tape, AecmLossBreakdown};
use super::{record_mlp, AecmParams, Architecture};
use crate::autodiff::Tape;
use crate::baselines::kmeans_pp_init;
use crate::cm::{check_alpha, cm_init_from_centroids, divergence, fit_from, CmParams, CmTrainConfig, LossWeights, PriorMode};
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::scalar::Scalar;
use crate::tensor::{Matrix, Rng};

/// Epoch budgets of the three pre-training stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Plain autoencoder epochs on the reconstruction loss.
    pub dae_epochs: usize,
    /// Clustering-module epochs on the frozen embedding.
    pub cm_epochs: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            dae_epochs: 50,
            cm_epochs: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum AecmInit {
    Random,
    Pretrain(PretrainConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AecmTrainConfig {
    pub alpha: Vec<f64>,
    /// Weight of the autoencoder reconstruction.
    pub beta: f64,
    /// Weight of the orthonormality penalty.
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub init: AecmInit,
    pub prior_mode: PriorMode,
    pub averaging: bool,
    /// When false the encoder and decoder stay at their initial values.
    pub train_autoencoder: bool,
}

impl AecmTrainConfig {
    /// Adam at `1e-3`, `β = λ = 1`, batch 32, 100 epochs, random init.
    pub fn new(k: usize, alpha: f64) -> Self {
        AecmTrainConfig {
            alpha: vec![alpha; k],
            beta: 1.0,
            lambda: 1.0,
            batch_size: 32,
            epochs: 100,
            lr: 1e-3,
            optimizer: OptimizerKind::adam(),
            seed: 0,
            init: AecmInit::Random,
            prior_mode: PriorMode::Symmetric,
            averaging: true,
            train_autoencoder: true,
        }
    }

    fn validate(&self, n: usize, k: usize) -> Result<()> {
        check_alpha(&self.alpha, k)?;
        if !(self.beta > 0.0) || !(self.lambda > 0.0) {
            return Err(Error::invalid("beta and lambda must be positive"));
        }
        if self.batch_size == 0 || self.batch_size > n {
            return Err(Error::invalid(format!("batch size {} outside 1..={n}", self.batch_size)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    fn cm_config(&self, epochs: usize) -> CmTrainConfig {
        CmTrainConfig {
            alpha: self.alpha.clone(),
            batch_size: self.batch_size,
            epochs,
            lr: self.lr,
            optimizer: self.optimizer,
            seed: self.seed,
            init: crate::cm::CmInit::KmeansPlusPlus,
            prior_mode: self.prior_mode,
            weights: LossWeights::default(),
            averaging: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AecmTrainResult<T = f64> {
    pub params: AecmParams<T>,
    /// Joint loss terms summed over the batches of every epoch.
    pub history: Vec<AecmLossBreakdown<T>>,
}

/// Autoencoder training on `Σ‖x − x̃‖²` alone; returns per-epoch losses.
fn train_dae<T: Scalar>(x: &Matrix<T>, p: &mut AecmParams<T>, config: &AecmTrainConfig, epochs: usize, rng: &mut Rng) -> Result<Vec<T>> {
    let n = x.rows();
    let count = p.dae_tensor_count();
    let mut opt = Optimizer::new(config.optimizer, config.lr, &p.tensors()[..count]);
    let active = vec![true; count];
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut total = T::zero();
        for batch in rng.permutation(n).chunks(config.batch_size) {
            let xb = x.select_rows(batch);
            let mut tape = Tape::new();
            let vars = p.record(&mut tape, true);
            let run = |tape: &mut Tape<T>| -> Result<_> {
                let xv = tape.constant(xb.clone());
                let input = tape.constant(p.feature_map.apply(&xb)?);
                let z = record_mlp(tape, input, &p.encoder, &vars.encoder)?;
                let x_rec = record_mlp(tape, z, &p.decoder, &vars.decoder)?;
                let diff = tape.sub(xv, x_rec)?;
                let sq = tape.square(diff)?;
                tape.sum(sq)
            };
            let loss = run(&mut tape).map_err(|e| divergence(epoch, e))?;
            total += tape.scalar(loss);
            let grads = tape.backward(loss)?;
            let flat = vars.flat();
            let g: Vec<Matrix<T>> = flat[..count].iter().map(|&v| grads.wrt(v)).collect();
            let mut tensors = p.tensors_mut();
            opt.step(&mut tensors[..count], &g, &active);
        }
        if !total.is_finite() {
            return Err(Error::Divergence {
                epoch,
                term: "rec_dae".into(),
            });
        }
        losses.push(total);
    }
    Ok(losses)
}

/// Three-stage initialisation: autoencoder alone, k-means++ on the
/// embedding to seed the clustering module, then the clustering module alone
/// on the frozen embedding.
pub fn pretrain<T: Scalar>(
    x: &Matrix<T>,
    arch: &Architecture,
    k: usize,
    config: &AecmTrainConfig,
    stages: &PretrainConfig,
    rng: &mut Rng,
) -> Result<AecmParams<T>> {
    pretrain_with_losses(x, arch, k, config, stages, rng).map(|(p, _)| p)
}

pub(crate) fn pretrain_with_losses<T: Scalar>(
    x: &Matrix<T>,
    arch: &Architecture,
    k: usize,
    config: &AecmTrainConfig,
    stages: &PretrainConfig,
    rng: &mut Rng,
) -> Result<(AecmParams<T>, Vec<T>)> {
    if x.cols() != arch.input_dim {
        return Err(Error::shape("pretrain", x.shape(), (x.rows(), arch.input_dim)));
    }
    let mut p = AecmParams::random(arch, k, rng)?;
    let losses = train_dae(x, &mut p, config, stages.dae_epochs, rng)?;

    let z = p.encode(x)?;
    let seeds = kmeans_pp_init(&z, k, rng)?;
    p.cm = match cm_init_from_centroids(&seeds) {
        Ok(cm) => cm,
        Err(Error::Singular(msg)) => {
            log::warn!("embedded k-means++ seeds are rank deficient ({msg}); using random CM init");
            CmParams::random(arch.p, k, rng)
        }
        Err(e) => return Err(e),
    };
    if stages.cm_epochs > 0 {
        p.cm = fit_from(&z, p.cm.clone(), &config.cm_config(stages.cm_epochs), rng, &mut |_, _, _| {})?.params;
    }
    Ok((p, losses))
}

pub fn train_aecm<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    arch: &Architecture,
    config: &AecmTrainConfig,
) -> Result<AecmTrainResult<T>> {
    train_aecm_with_hook(x, k, arch, config, |_, _, _| {})
}

/// [`train_aecm`] calling `hook(epoch, params, epoch_breakdown)` after every epoch.
pub fn train_aecm_with_hook<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    arch: &Architecture,
    config: &AecmTrainConfig,
    mut hook: impl FnMut(usize, &AecmParams<T>, &AecmLossBreakdown<T>),
) -> Result<AecmTrainResult<T>> {
    config.validate(x.rows(), k)?;
    if x.cols() != arch.input_dim {
        return Err(Error::shape("train_aecm", x.shape(), (x.rows(), arch.input_dim)));
    }
    let mut rng = Rng::new(config.seed);
    let p = match config.init {
        AecmInit::Random => AecmParams::random(arch, k, &mut rng)?,
        AecmInit::Pretrain(stages) => pretrain(x, arch, k, config, &stages, &mut rng)?,
    };
    joint_fit(x, p, config, &mut rng, &mut hook)
}

/// Joint training from the given parameters.
pub fn train_aecm_from<T: Scalar>(x: &Matrix<T>, params: AecmParams<T>, config: &AecmTrainConfig) -> Result<AecmTrainResult<T>> {
    config.validate(x.rows(), params.k())?;
    let mut rng = Rng::new(config.seed);
    joint_fit(x, params, config, &mut rng, &mut |_, _, _| {})
}

fn joint_fit<T: Scalar>(
    x: &Matrix<T>,
    mut p: AecmParams<T>,
    config: &AecmTrainConfig,
    rng: &mut Rng,
    hook: &mut dyn FnMut(usize, &AecmParams<T>, &AecmLossBreakdown<T>),
) -> Result<AecmTrainResult<T>> {
    let n = x.rows();
    let mut opt = Optimizer::new(config.optimizer, config.lr, &p.tensors());
    let count = p.dae_tensor_count();
    let total_tensors = count + 4;
    let active: Vec<bool> = (0..total_tensors).map(|i| i >= count || config.train_autoencoder).collect();
    let mut history = Vec::with_capacity(config.epochs);

    let step = |p: &mut AecmParams<T>, opt: &mut Optimizer<T>, xb: &Matrix<T>, active: &[bool], epoch: usize| -> Result<AecmLossBreakdown<T>> {
        let mut tape = Tape::new();
        let vars = p.record(&mut tape, config.train_autoencoder && active[0]);
        let terms = aecm_loss_tape(&mut tape, xb, p, &vars, &config.alpha, config.beta, config.lambda, config.prior_mode)
            .map_err(|e| divergence(epoch, e))?;
        let b = terms.breakdown(&tape, config.beta, config.lambda);
        let grads = tape.backward(terms.total)?;
        let g: Vec<Matrix<T>> = vars.flat().iter().map(|&v| grads.wrt(v)).collect();
        opt.step(&mut p.tensors_mut(), &g, active);
        Ok(b)
    };

    for epoch in 0..config.epochs {
        let mut acc = AecmLossBreakdown::default();
        for batch in rng.permutation(n).chunks(config.batch_size) {
            acc += step(&mut p, &mut opt, &x.select_rows(batch), &active, epoch)?;
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
        let epoch = config.epochs;
        let mut only_centroids = vec![false; total_tensors];
        only_centroids[total_tensors - 2] = true;
        only_centroids[total_tensors - 1] = true;
        let mut w_sum = Matrix::zeros(p.k(), p.p());
        let mut b_sum = Matrix::zeros(1, p.p());
        let mut steps = 0usize;
        for batch in rng.permutation(n).chunks(config.batch_size) {
            step(&mut p, &mut opt, &x.select_rows(batch), &only_centroids, epoch)?;
            w_sum.axpy(T::one(), &p.cm.w_dec)?;
            b_sum.axpy(T::one(), &p.cm.b_dec)?;
            steps += 1;
        }
        let inv = T::one() / T::of_usize(steps.max(1));
        p.cm.w_dec = w_sum.scale(inv);
        p.cm.b_dec = b_sum.scale(inv);
    }
    Ok(AecmTrainResult { params: p, history })
}
