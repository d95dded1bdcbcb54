use std::collections::BTreeMap;

use aecm_core::metrics::{acc, ari, homogeneity, nmi};
use serde::Serialize;

use crate::config::Resolved;
use crate::error::CliResult;
use crate::run::RunOutput;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub k_true: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub homogeneity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_sp: Option<f64>,
    pub loss: BTreeMap<String, f64>,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "ari" => self.ari,
            "nmi" => self.nmi,
            "acc" => self.acc,
            "homogeneity" => self.homogeneity,
            "l_sp" => self.l_sp,
            _ => None,
        }
    }
}

pub const METRICS: [&str; 5] = ["ari", "nmi", "acc", "homogeneity", "l_sp"];

/// Summary over runs; `std` is the population standard deviation and `best`
/// is the maximum, or the minimum for `l_sp`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub best: f64,
}

impl Aggregate {
    pub fn of(values: &[f64], lower_is_better: bool) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let best = if lower_is_better {
            values.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        Aggregate { mean, std, best }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub config: Resolved,
    pub dataset: DatasetInfo,
    pub runs: Vec<RunRecord>,
    pub aggregate: BTreeMap<String, Aggregate>,
    /// Index of the run with the smallest `l_sp`.
    pub selected_run: Option<usize>,
    pub wall_time_s: f64,
}

pub fn record(out: &RunOutput, truth: Option<&[usize]>) -> CliResult<RunRecord> {
    let scores = match truth {
        Some(t) => Some((
            ari(t, &out.labels)?,
            nmi(t, &out.labels)?,
            acc(t, &out.labels)?,
            homogeneity(t, &out.labels)?,
        )),
        None => None,
    };
    Ok(RunRecord {
        seed: out.seed,
        ari: scores.map(|s| s.0),
        nmi: scores.map(|s| s.1),
        acc: scores.map(|s| s.2),
        homogeneity: scores.map(|s| s.3),
        l_sp: out.l_sp,
        loss: out.loss.clone(),
        wall_time_s: out.wall_time_s,
    })
}

pub fn aggregate(runs: &[RunRecord]) -> BTreeMap<String, Aggregate> {
    let mut out = BTreeMap::new();
    for m in METRICS {
        let values: Option<Vec<f64>> = runs.iter().map(|r| r.metric(m)).collect();
        if let Some(v) = values.filter(|v| !v.is_empty()) {
            out.insert(m.to_string(), Aggregate::of(&v, m == "l_sp"));
        }
    }
    out
}

pub fn select_run(runs: &[RunRecord]) -> Option<usize> {
    runs.iter()
        .enumerate()
        .filter_map(|(i, r)| r.l_sp.map(|l| (i, l)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}
