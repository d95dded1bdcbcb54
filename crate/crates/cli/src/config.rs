//! Run configuration: parsing, validation and preset resolution.

use std::path::PathBuf;

use aecm_core::aecm::FeatureMap;
use aecm_core::cm::PriorMode;
use aecm_core::data::{bundled_by_name, gen_five_gaussians, gen_toy, load_csv, minmax_normalize, Dataset, ToyKind};
use aecm_core::presets::*;
use aecm_core::tensor::standardize;
use aecm_core::Matrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const FIVE_GAUSSIANS: &str = "five-gaussians";
const FIVE_GAUSSIANS_SAMPLES: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Cm,
    Aecm,
    Kmeans,
    GmmIso,
    GmmFull,
}

impl ModelKind {
    fn trains_module(self) -> bool {
        matches!(self, ModelKind::Cm | ModelKind::Aecm)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerChoice {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitChoice {
    Random,
    Kmeanspp,
    Pretrain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalize {
    Standardize,
    Minmax,
    None,
}

/// Concentration given as one value for every cluster or one per cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Alpha {
    Scalar(f64),
    Vector(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainSpec {
    pub dae_epochs: usize,
    pub cm_epochs: usize,
}

/// Exactly one of `path`, `generator` or `name` selects the data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub header: Option<bool>,
    /// 0-based column holding the ground-truth labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_column: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Bundled table: iris, wine or pendigits.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalize: Option<Normalize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub dataset: DatasetSpec,
    pub k: Option<usize>,
    pub alpha: Option<Alpha>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub batch_size: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub optimizer: Option<OptimizerChoice>,
    pub init: Option<InitChoice>,
    pub pretrain: Option<PretrainSpec>,
    /// Hidden layer widths of the encoder; the decoder mirrors them.
    pub arch: Option<Vec<usize>>,
    pub p: Option<usize>,
    pub feature_map: Option<FeatureMap>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub prior_mode: Option<PriorMode>,
    pub averaging: Option<bool>,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses a configuration document, reporting failures with a JSON pointer.
pub fn parse_config(value: Value) -> CliResult<RunConfig> {
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| CliError::at(&pointer(e.path()), e.inner()))?;
    validate(&cfg)?;
    Ok(cfg)
}

pub fn read_config_value(path: &std::path::Path) -> CliResult<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: invalid JSON: {e}", path.display())))
}

/// Applies `key=value` overrides; dotted keys reach into nested objects and
/// values are parsed as JSON, falling back to a plain string.
pub fn apply_overrides(value: &mut Value, overrides: &[String]) -> CliResult<()> {
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override `{o}` is not KEY=VALUE")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(value, key, parsed)?;
    }
    Ok(())
}

pub fn set_path(value: &mut Value, key: &str, v: Value) -> CliResult<()> {
    let mut cur = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| CliError::config(format!("cannot set `{key}`: parent is not an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

fn validate(c: &RunConfig) -> CliResult<()> {
    let d = &c.dataset;
    let sources = [d.path.is_some(), d.generator.is_some(), d.name.is_some()];
    if sources.iter().filter(|&&s| s).count() != 1 {
        return Err(CliError::at("/dataset", "give exactly one of `path`, `generator` or `name`"));
    }
    if d.path.is_none() && (d.header.is_some() || d.label_column.is_some()) {
        return Err(CliError::at("/dataset", "`header` and `label_column` only apply to `path`"));
    }
    if d.generator.is_none() && (d.n.is_some() || d.noise.is_some() || d.seed.is_some()) {
        return Err(CliError::at("/dataset", "`n`, `noise` and `seed` only apply to `generator`"));
    }
    if d.n == Some(0) {
        return Err(CliError::at("/dataset/n", "must be positive"));
    }
    let positive = [("/k", c.k), ("/runs", c.runs), ("/batch_size", c.batch_size), ("/p", c.p)];
    for (ptr, v) in positive {
        if v == Some(0) {
            return Err(CliError::at(ptr, "must be positive"));
        }
    }
    if let Some(lr) = c.lr {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(CliError::at("/lr", "must be a positive number"));
        }
    }
    for (ptr, v) in [("/beta", c.beta), ("/lambda", c.lambda)] {
        if let Some(v) = v {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::at(ptr, "must be non-negative"));
            }
        }
    }
    match &c.alpha {
        Some(Alpha::Scalar(a)) if !(*a > 0.0 && a.is_finite()) => return Err(CliError::at("/alpha", "must be positive")),
        Some(Alpha::Vector(v)) => {
            if let Some(i) = v.iter().position(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(CliError::at(&format!("/alpha/{i}"), "must be positive"));
            }
        }
        _ => {}
    }
    if let Some(arch) = &c.arch {
        if let Some(i) = arch.iter().position(|&w| w == 0) {
            return Err(CliError::at(&format!("/arch/{i}"), "layer width must be positive"));
        }
    }

    let aecm_only = [
        ("/beta", c.beta.is_some()),
        ("/lambda", c.lambda.is_some()),
        ("/pretrain", c.pretrain.is_some()),
        ("/arch", c.arch.is_some()),
        ("/p", c.p.is_some()),
        ("/feature_map", c.feature_map.is_some()),
    ];
    for (ptr, set) in aecm_only {
        if set && c.model != ModelKind::Aecm {
            return Err(CliError::at(ptr, "only used by model `aecm`"));
        }
    }
    let module_only = [
        ("/alpha", c.alpha.is_some()),
        ("/batch_size", c.batch_size.is_some()),
        ("/lr", c.lr.is_some()),
        ("/optimizer", c.optimizer.is_some()),
        ("/prior_mode", c.prior_mode.is_some()),
        ("/averaging", c.averaging.is_some()),
    ];
    for (ptr, set) in module_only {
        if set && !c.model.trains_module() {
            return Err(CliError::at(ptr, "only used by models `cm` and `aecm`"));
        }
    }
    if c.init == Some(InitChoice::Pretrain) && c.model != ModelKind::Aecm {
        return Err(CliError::at("/init", "`pretrain` is only available for model `aecm`"));
    }
    if c.pretrain.is_some() && c.init != Some(InitChoice::Pretrain) {
        return Err(CliError::at("/pretrain", "requires `init` = `pretrain`"));
    }
    Ok(())
}

/// Loaded data after preprocessing, with the key used for preset lookup.
pub struct LoadedData {
    pub raw: Dataset,
    pub x: Matrix,
    pub normalize: Normalize,
    pub preset_key: Option<String>,
}

pub fn load_dataset(spec: &DatasetSpec) -> CliResult<LoadedData> {
    let (raw, key) = if let Some(path) = &spec.path {
        (load_csv::<f64>(path, spec.header.unwrap_or(false), spec.label_column)?, None)
    } else if let Some(g) = &spec.generator {
        let key = g.to_ascii_lowercase().replace('_', "-");
        let seed = spec.seed.unwrap_or(0);
        let ds = if key == FIVE_GAUSSIANS {
            if spec.noise.is_some() {
                return Err(CliError::at("/dataset/noise", "five-gaussians has no noise parameter"));
            }
            gen_five_gaussians(spec.n.unwrap_or(FIVE_GAUSSIANS_SAMPLES), seed)?
        } else {
            let kind: ToyKind = key.parse().map_err(|e| CliError::at("/dataset/generator", e))?;
            gen_toy(kind, spec.n.unwrap_or(TOY_SAMPLES), spec.noise, seed).map_err(|e| CliError::at("/dataset", e))?
        };
        (ds, Some(key))
    } else {
        let name = spec.name.as_deref().unwrap_or_default().to_ascii_lowercase();
        let ds = bundled_by_name(&name)
            .ok_or_else(|| CliError::at("/dataset/name", format!("unknown bundled dataset `{name}` (iris, wine, pendigits)")))?;
        let key = ds.name.clone();
        (ds, Some(key))
    };
    let normalize = spec.normalize.unwrap_or(match key.as_deref() {
        Some("pendigits") => Normalize::Minmax,
        _ => Normalize::Standardize,
    });
    let x = match normalize {
        Normalize::Standardize => standardize(&raw.features).data,
        Normalize::Minmax => minmax_normalize(&raw.features),
        Normalize::None => raw.features.clone(),
    };
    Ok(LoadedData {
        raw,
        x,
        normalize,
        preset_key: key,
    })
}

/// Fully specified settings of one training job.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolved {
    pub model: ModelKind,
    pub dataset: DatasetSpec,
    pub normalize: Normalize,
    pub k: usize,
    pub seed: u64,
    pub runs: usize,
    pub init: InitChoice,
    /// Training epochs, or the iteration cap for k-means and EM.
    pub epochs: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerChoice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_mode: Option<PriorMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub averaging: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arch: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_map: Option<FeatureMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretrain: Option<PretrainSpec>,
}

/// Module defaults before any preset applies.
struct Defaults {
    alpha: f64,
    beta: f64,
    lambda: f64,
    batch_size: usize,
    epochs: usize,
    lr: f64,
    optimizer: OptimizerChoice,
    init: InitChoice,
    hidden: Vec<usize>,
    p: Option<usize>,
    feature_map: FeatureMap,
}

fn defaults(model: ModelKind, key: Option<&str>) -> Defaults {
    let mut d = Defaults {
        alpha: 5.0,
        beta: 1.0,
        lambda: 1.0,
        batch_size: if model == ModelKind::Aecm { 32 } else { 20 },
        epochs: match model {
            ModelKind::Cm => 50,
            ModelKind::Aecm => 100,
            ModelKind::Kmeans => 300,
            ModelKind::GmmIso | ModelKind::GmmFull => 150,
        },
        lr: 1e-3,
        optimizer: OptimizerChoice::Adam,
        init: match model {
            ModelKind::Aecm => InitChoice::Random,
            _ => InitChoice::Kmeanspp,
        },
        hidden: Vec::new(),
        p: None,
        feature_map: FeatureMap::Identity,
    };
    let Some(key) = key else { return d };
    match model {
        ModelKind::Cm if key == FIVE_GAUSSIANS => {
            d.alpha = FIVE_GAUSSIANS_ALPHA;
            d.batch_size = FIVE_GAUSSIANS_BATCH;
            d.epochs = FIVE_GAUSSIANS_EPOCHS;
            d.optimizer = OptimizerChoice::Sgd;
            d.lr = FIVE_GAUSSIANS_SGD_LR;
        }
        ModelKind::Cm => {
            if let Some(p) = cm_preset(key) {
                d.alpha = p.alpha;
                d.batch_size = p.batch_size;
                d.epochs = CM_PRESET_EPOCHS;
                d.lr = CM_PRESET_LR;
            }
        }
        ModelKind::Aecm => {
            if let Ok(kind) = key.parse::<ToyKind>() {
                let t = toy_preset(kind);
                d.alpha = t.alpha;
                d.beta = t.beta;
                d.lambda = t.lambda;
                d.hidden = t.hidden.to_vec();
                d.p = Some(t.p);
                d.feature_map = t.feature_map;
                d.batch_size = TOY_BATCH_SIZE;
                d.epochs = TOY_EPOCHS;
            } else if let Some(p) = aecm_preset(key) {
                d.alpha = p.alpha;
                d.beta = p.beta;
                d.lambda = p.lambda;
                d.batch_size = p.batch_size;
                d.p = Some(p.p);
                if UCI_PRESETS.iter().any(|u| u.name == p.name) {
                    d.epochs = UCI_EPOCHS;
                } else {
                    d.hidden = DEEP_HIDDEN.to_vec();
                    d.epochs = CM_PRESET_EPOCHS;
                }
            }
        }
        _ => {}
    }
    d
}

/// Fills every unset field from the dataset's preset or the generic defaults.
pub fn resolve(c: &RunConfig, data: &LoadedData) -> CliResult<Resolved> {
    let k = match (c.k, data.raw.k_true) {
        (Some(k), _) => k,
        (None, Some(k)) => k,
        (None, None) => return Err(CliError::at("/k", "required when the dataset has no labels")),
    };
    if k > data.x.rows() {
        return Err(CliError::at("/k", format!("{k} clusters for {} points", data.x.rows())));
    }
    let d = defaults(c.model, data.preset_key.as_deref());
    let module = c.model.trains_module();
    let aecm = c.model == ModelKind::Aecm;
    let alpha = match &c.alpha {
        None => vec![d.alpha; k],
        Some(Alpha::Scalar(a)) => vec![*a; k],
        Some(Alpha::Vector(v)) if v.len() == k => v.clone(),
        Some(Alpha::Vector(v)) => return Err(CliError::at("/alpha", format!("has {} entries for k = {k}", v.len()))),
    };
    let init = c.init.unwrap_or(d.init);
    Ok(Resolved {
        model: c.model,
        dataset: c.dataset.clone(),
        normalize: data.normalize,
        k,
        seed: c.seed.unwrap_or(0),
        runs: c.runs.unwrap_or(1),
        init,
        epochs: c.epochs.unwrap_or(d.epochs),
        alpha: module.then_some(alpha),
        batch_size: module.then(|| c.batch_size.unwrap_or(d.batch_size)),
        lr: module.then(|| c.lr.unwrap_or(d.lr)),
        optimizer: module.then(|| c.optimizer.unwrap_or(d.optimizer)),
        prior_mode: module.then(|| c.prior_mode.unwrap_or_default()),
        averaging: module.then(|| c.averaging.unwrap_or(true)),
        beta: aecm.then(|| c.beta.unwrap_or(d.beta)),
        lambda: aecm.then(|| c.lambda.unwrap_or(d.lambda)),
        arch: aecm.then(|| c.arch.clone().unwrap_or(d.hidden.clone())),
        p: aecm.then(|| c.p.or(d.p).unwrap_or(k)),
        feature_map: aecm.then(|| c.feature_map.unwrap_or(d.feature_map)),
        pretrain: (aecm && init == InitChoice::Pretrain).then(|| {
            c.pretrain.unwrap_or(PretrainSpec {
                dae_epochs: 50,
                cm_epochs: 20,
            })
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn err(v: Value) -> String {
        match parse_config(v) {
            Err(CliError::Config(m)) => m,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_pointer() {
        let m = err(json!({"model": "cm", "dataset": {"name": "iris"}, "alpah": 3}));
        assert!(m.starts_with("/alpah") || m.contains("alpah"), "{m}");
        let m = err(json!({"model": "cm", "dataset": {"name": "iris", "colour": 1}}));
        assert!(m.contains("/dataset") && m.contains("colour"), "{m}");
    }

    #[test]
    fn type_errors_point_into_nested_values() {
        let m = err(json!({"model": "aecm", "dataset": {"name": "iris"}, "arch": [4, "x"]}));
        assert!(m.starts_with("/arch/1"), "{m}");
        let m = err(json!({"model": "svm", "dataset": {"name": "iris"}}));
        assert!(m.starts_with("/model"), "{m}");
    }

    #[test]
    fn semantic_checks() {
        let m = err(json!({"model": "cm", "dataset": {}}));
        assert!(m.starts_with("/dataset:"), "{m}");
        let m = err(json!({"model": "kmeans", "dataset": {"name": "iris"}, "beta": 1.0}));
        assert!(m.starts_with("/beta:"), "{m}");
        let m = err(json!({"model": "cm", "dataset": {"name": "iris"}, "alpha": [1.0, -2.0]}));
        assert!(m.starts_with("/alpha/1:"), "{m}");
        let m = err(json!({"model": "cm", "dataset": {"name": "iris"}, "init": "pretrain"}));
        assert!(m.starts_with("/init:"), "{m}");
    }

    #[test]
    fn presets_fill_unset_fields() {
        let c = parse_config(json!({"model": "aecm", "dataset": {"generator": "moons"}})).unwrap();
        let data = load_dataset(&c.dataset).unwrap();
        let r = resolve(&c, &data).unwrap();
        assert_eq!(r.alpha, Some(vec![11.0, 11.0]));
        assert_eq!(r.arch, Some(vec![20, 20, 20]));
        assert_eq!((r.p, r.beta, r.batch_size), (Some(1), Some(100.0), Some(TOY_BATCH_SIZE)));

        let c = parse_config(json!({"model": "cm", "dataset": {"generator": "five-gaussians"}, "alpha": 2.5})).unwrap();
        let r = resolve(&c, &load_dataset(&c.dataset).unwrap()).unwrap();
        assert_eq!(r.alpha, Some(vec![2.5; 5]));
        assert_eq!(r.optimizer, Some(OptimizerChoice::Sgd));
        assert_eq!(r.beta, None);

        let c = parse_config(json!({"model": "cm", "dataset": {"name": "pendigits"}})).unwrap();
        let data = load_dataset(&c.dataset).unwrap();
        assert_eq!(data.normalize, Normalize::Minmax);
        let r = resolve(&c, &data).unwrap();
        assert_eq!((r.k, r.batch_size, r.epochs), (10, Some(80), CM_PRESET_EPOCHS));
    }

    #[test]
    fn alpha_vector_must_match_k() {
        let c = parse_config(json!({"model": "cm", "dataset": {"name": "iris"}, "alpha": [1.0, 2.0]})).unwrap();
        match resolve(&c, &load_dataset(&c.dataset).unwrap()) {
            Err(CliError::Config(m)) => assert!(m.starts_with("/alpha:"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let mut v = json!({"model": "cm", "dataset": {"generator": "blobs"}});
        apply_overrides(&mut v, &["dataset.n=50".into(), "alpha=3".into(), "prior_mode=sorted".into()]).unwrap();
        let c = parse_config(v).unwrap();
        assert_eq!(c.dataset.n, Some(50));
        assert_eq!(c.alpha, Some(Alpha::Scalar(3.0)));
        assert_eq!(c.prior_mode, Some(PriorMode::Sorted));
        assert!(apply_overrides(&mut json!({}), &["novalue".into()]).is_err());
    }
}
