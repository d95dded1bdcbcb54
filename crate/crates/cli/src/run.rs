//! Executes one seeded run of a resolved configuration.

use std::collections::BTreeMap;
use std::time::Instant;

use aecm_core::aecm::{self, AecmInit, AecmTrainConfig, Architecture, PretrainConfig};
use aecm_core::baselines::{em_gmm, kmeans_pp_init, lloyd, CovarianceKind, EmConfig, GmmInit};
use aecm_core::cm::{self, CmInit, CmTrainConfig, LspMode};
use aecm_core::model_io::Model;
use aecm_core::optim::OptimizerKind;
use aecm_core::{Matrix, Rng};

use crate::config::{InitChoice, ModelKind, OptimizerChoice, Resolved};
use crate::error::CliResult;

pub struct RunOutput {
    pub seed: u64,
    pub labels: Vec<usize>,
    /// Centroids in input space; AE-CM centroids are decoded.
    pub centroids: Matrix,
    pub history_header: Vec<&'static str>,
    pub history: Vec<Vec<f64>>,
    pub loss: BTreeMap<String, f64>,
    pub l_sp: Option<f64>,
    pub model: Option<Model>,
    pub wall_time_s: f64,
}

fn optimizer(c: &Resolved) -> OptimizerKind {
    match c.optimizer {
        Some(OptimizerChoice::Sgd) => OptimizerKind::Sgd,
        _ => OptimizerKind::adam(),
    }
}

fn cm_config(c: &Resolved, seed: u64) -> CmTrainConfig {
    let mut t = CmTrainConfig::new(c.k, 1.0);
    t.alpha = c.alpha.clone().unwrap_or_default();
    t.batch_size = c.batch_size.unwrap_or(t.batch_size);
    t.epochs = c.epochs;
    t.lr = c.lr.unwrap_or(t.lr);
    t.optimizer = optimizer(c);
    t.seed = seed;
    t.init = match c.init {
        InitChoice::Random => CmInit::Random,
        _ => CmInit::KmeansPlusPlus,
    };
    t.prior_mode = c.prior_mode.unwrap_or_default();
    t.averaging = c.averaging.unwrap_or(true);
    t
}

fn aecm_config(c: &Resolved, seed: u64) -> AecmTrainConfig {
    let mut t = AecmTrainConfig::new(c.k, 1.0);
    t.alpha = c.alpha.clone().unwrap_or_default();
    t.beta = c.beta.unwrap_or(t.beta);
    t.lambda = c.lambda.unwrap_or(t.lambda);
    t.batch_size = c.batch_size.unwrap_or(t.batch_size);
    t.epochs = c.epochs;
    t.lr = c.lr.unwrap_or(t.lr);
    t.optimizer = optimizer(c);
    t.seed = seed;
    t.init = match c.pretrain {
        Some(p) => AecmInit::Pretrain(PretrainConfig {
            dae_epochs: p.dae_epochs,
            cm_epochs: p.cm_epochs,
        }),
        None => AecmInit::Random,
    };
    t.prior_mode = c.prior_mode.unwrap_or_default();
    t.averaging = c.averaging.unwrap_or(true);
    t
}

fn random_rows(x: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let idx = rng.permutation(x.rows());
    x.select_rows(&idx[..k])
}

/// Trains or fits the configured model with the given seed on `x`.
pub fn execute(c: &Resolved, x: &Matrix, seed: u64) -> CliResult<RunOutput> {
    let start = Instant::now();
    let mut out = match c.model {
        ModelKind::Cm => {
            let r = cm::train_cm(x, c.k, &cm_config(c, seed))?;
            let f = cm::cm_forward(x, &r.params)?;
            let b = cm::cm_loss(x, &f.gamma, &f.x_rec, &r.params, c.alpha.as_deref().unwrap_or_default(), c.prior_mode.unwrap_or_default())?;
            RunOutput {
                seed,
                labels: f.gamma.argmax_rows(),
                centroids: cm::extract_centroids(&r.params),
                history_header: vec!["epoch", "e_rec", "e_gini", "e_cross", "e_prior", "total"],
                history: r
                    .history
                    .iter()
                    .enumerate()
                    .map(|(i, h)| vec![(i + 1) as f64, h.e_rec, h.e_gini, h.e_cross, h.e_prior, h.total])
                    .collect(),
                loss: BTreeMap::from([
                    ("e_rec".into(), b.e_rec),
                    ("e_gini".into(), b.e_gini),
                    ("e_cross".into(), b.e_cross),
                    ("e_prior".into(), b.e_prior),
                    ("total".into(), b.total),
                ]),
                l_sp: Some(cm::l_sp(x, &r.params, LspMode::Sum)?),
                model: Some(Model::Cm(r.params)),
                wall_time_s: 0.0,
            }
        }
        ModelKind::Aecm => {
            let arch = Architecture::new(x.cols(), c.arch.clone().unwrap_or_default(), c.p.unwrap_or(c.k))
                .with_feature_map(c.feature_map.unwrap_or_default());
            let t = aecm_config(c, seed);
            let r = aecm::train_aecm(x, c.k, &arch, &t)?;
            let f = aecm::aecm_forward(x, &r.params)?;
            let b = aecm::aecm_loss(x, &f, &r.params, &t.alpha, t.beta, t.lambda, t.prior_mode)?;
            let mu = cm::extract_centroids(&r.params.cm);
            RunOutput {
                seed,
                labels: f.gamma.argmax_rows(),
                centroids: r.params.decode(&mu)?,
                history_header: vec!["epoch", "rec_dae", "rec_cm", "sparsity", "prior", "ortho", "total"],
                history: r
                    .history
                    .iter()
                    .enumerate()
                    .map(|(i, h)| vec![(i + 1) as f64, h.rec_dae, h.rec_cm, h.sparsity, h.prior, h.ortho, h.total])
                    .collect(),
                loss: BTreeMap::from([
                    ("rec_dae".into(), b.rec_dae),
                    ("rec_cm".into(), b.rec_cm),
                    ("sparsity".into(), b.sparsity),
                    ("prior".into(), b.prior),
                    ("ortho".into(), b.ortho),
                    ("total".into(), b.total),
                ]),
                l_sp: Some(cm::l_sp(&f.z, &r.params.cm, LspMode::Sum)?),
                model: Some(Model::Aecm(r.params)),
                wall_time_s: 0.0,
            }
        }
        ModelKind::Kmeans => {
            let mut rng = Rng::new(seed);
            let init = match c.init {
                InitChoice::Random => random_rows(x, c.k, &mut rng),
                _ => kmeans_pp_init(x, c.k, &mut rng)?,
            };
            let r = lloyd(x, &init, c.epochs, 0.0)?;
            RunOutput {
                seed,
                labels: r.labels,
                centroids: r.centroids,
                history_header: vec!["iteration", "inertia"],
                history: r.inertia_trace.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect(),
                loss: BTreeMap::from([("inertia".into(), r.inertia)]),
                l_sp: None,
                model: None,
                wall_time_s: 0.0,
            }
        }
        ModelKind::GmmIso | ModelKind::GmmFull => {
            let kind = if c.model == ModelKind::GmmIso { CovarianceKind::Isotropic } else { CovarianceKind::Full };
            let init = match c.init {
                InitChoice::Random => GmmInit::RandomRows,
                _ => GmmInit::KmeansPlusPlus,
            };
            let em = EmConfig {
                max_iter: c.epochs,
                ..EmConfig::default()
            };
            let r = em_gmm(x, c.k, kind, init, em, &mut Rng::new(seed))?;
            RunOutput {
                seed,
                labels: r.labels(),
                centroids: r.params.means.clone(),
                history_header: vec!["iteration", "loglik"],
                history: r.loglik_trace.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect(),
                loss: BTreeMap::from([("loglik".into(), r.loglik_trace.last().copied().unwrap_or(f64::NAN))]),
                l_sp: None,
                model: None,
                wall_time_s: 0.0,
            }
        }
    };
    out.wall_time_s = start.elapsed().as_secs_f64();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{load_dataset, parse_config, resolve};
    use serde_json::json;

    fn run(v: serde_json::Value, seed: u64) -> RunOutput {
        let c = parse_config(v).unwrap();
        let data = load_dataset(&c.dataset).unwrap();
        let r = resolve(&c, &data).unwrap();
        execute(&r, &data.x, seed).unwrap()
    }

    #[test]
    fn every_model_produces_consistent_shapes() {
        for model in ["cm", "aecm", "kmeans", "gmm-iso", "gmm-full"] {
            let mut v = json!({"model": model, "dataset": {"generator": "blobs", "n": 90}, "epochs": 5});
            if model == "aecm" {
                v["batch_size"] = json!(10);
            }
            let out = run(v, 3);
            assert_eq!(out.labels.len(), 90, "{model}");
            assert_eq!(out.centroids.shape(), (3, 2), "{model}");
            assert!(!out.history.is_empty(), "{model}");
            assert!(out.history.iter().all(|r| r.len() == out.history_header.len()), "{model}");
            assert_eq!(out.l_sp.is_some(), out.model.is_some(), "{model}");
        }
    }

    #[test]
    fn same_seed_same_labels() {
        let v = json!({"model": "cm", "dataset": {"generator": "blobs", "n": 60}, "epochs": 3});
        assert_eq!(run(v.clone(), 1).labels, run(v, 1).labels);
    }
}
