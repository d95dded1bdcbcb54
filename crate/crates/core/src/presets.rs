//! Named hyper-parameter presets.
//!
//! The `CM_PRESETS`, `AECM_PRESETS` and `TOY_PRESETS` tables are the published
//! settings for each benchmark; the remaining presets are calibrated for the
//! desk-scale experiments of this crate (five Gaussians, iris, wine).

use crate::aecm::FeatureMap;
use crate::data::ToyKind;

/// Clustering-module settings: concentration `α` (broadcast to all
/// clusters) and batch size. Trained with Adam at `1e-3` for 150 epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CmPreset {
    pub name: &'static str,
    pub alpha: f64,
    pub batch_size: usize,
}

pub const CM_PRESET_EPOCHS: usize = 150;
pub const CM_PRESET_LR: f64 = 1e-3;

pub const CM_PRESETS: [CmPreset; 8] = [
    CmPreset { name: "mnist", alpha: 177.0, batch_size: 111 },
    CmPreset { name: "fmnist", alpha: 80.0, batch_size: 35 },
    CmPreset { name: "usps", alpha: 40.0, batch_size: 150 },
    CmPreset { name: "cifar10", alpha: 164.0, batch_size: 350 },
    CmPreset { name: "r10k", alpha: 10.0, batch_size: 400 },
    CmPreset { name: "20news", alpha: 11.0, batch_size: 85 },
    CmPreset { name: "10x73k", alpha: 1000.0, batch_size: 500 },
    CmPreset { name: "pendigits", alpha: 13.0, batch_size: 80 },
];

/// AE-CM settings; `p` is the embedding width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AecmPreset {
    pub name: &'static str,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub p: usize,
}

pub const AECM_PRESETS: [AecmPreset; 8] = [
    AecmPreset { name: "mnist", alpha: 230.0, beta: 5.0, lambda: 1.0, batch_size: 500, p: 10 },
    AecmPreset { name: "fmnist", alpha: 13.0, beta: 47.0, lambda: 1.0, batch_size: 175, p: 10 },
    AecmPreset { name: "usps", alpha: 20.0, beta: 0.5, lambda: 1.0, batch_size: 256, p: 10 },
    AecmPreset { name: "cifar10", alpha: 64.0, beta: 1.0, lambda: 1.0, batch_size: 256, p: 10 },
    AecmPreset { name: "r10k", alpha: 2.0, beta: 1.0, lambda: 1.0, batch_size: 256, p: 100 },
    AecmPreset { name: "20news", alpha: 10.0, beta: 232.0, lambda: 1.0, batch_size: 300, p: 100 },
    AecmPreset { name: "10x73k", alpha: 7.0, beta: 15.0, lambda: 1.0, batch_size: 7, p: 10 },
    AecmPreset { name: "pendigits", alpha: 13.0, beta: 0.5, lambda: 1.0, batch_size: 100, p: 10 },
];

/// Hidden widths of the image/text autoencoder, `d-500-500-2000-p`.
pub const DEEP_HIDDEN: [usize; 3] = [500, 500, 2000];

/// Toy-dataset AE-CM settings: batch 20, up to 100 epochs, Adam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToyPreset {
    pub kind: ToyKind,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub hidden: &'static [usize],
    pub p: usize,
    pub feature_map: FeatureMap,
}

pub const TOY_BATCH_SIZE: usize = 20;
pub const TOY_EPOCHS: usize = 100;
/// Points per toy dataset.
pub const TOY_SAMPLES: usize = 1500;

pub const TOY_PRESETS: [ToyPreset; 6] = [
    ToyPreset { kind: ToyKind::Moons, alpha: 11.0, beta: 100.0, lambda: 0.001, hidden: &[20, 20, 20], p: 1, feature_map: FeatureMap::Identity },
    ToyPreset { kind: ToyKind::Circles, alpha: 11.0, beta: 0.001, lambda: 0.001, hidden: &[], p: 3, feature_map: FeatureMap::Quadratic },
    ToyPreset { kind: ToyKind::Varied, alpha: 11.0, beta: 100.0, lambda: 0.001, hidden: &[], p: 3, feature_map: FeatureMap::Identity },
    ToyPreset { kind: ToyKind::Aniso, alpha: 11.0, beta: 1.0, lambda: 0.001, hidden: &[], p: 3, feature_map: FeatureMap::Identity },
    ToyPreset { kind: ToyKind::Blobs, alpha: 11.0, beta: 1.0, lambda: 0.001, hidden: &[], p: 3, feature_map: FeatureMap::Identity },
    ToyPreset { kind: ToyKind::NoStructure, alpha: 0.1, beta: 1.0, lambda: 0.001, hidden: &[], p: 3, feature_map: FeatureMap::Identity },
];

/// Five-Gaussians CM protocol: standardized data, SGD, batch 20, `α = 5`, 50 epochs.
pub const FIVE_GAUSSIANS_ALPHA: f64 = 5.0;
pub const FIVE_GAUSSIANS_BATCH: usize = 20;
pub const FIVE_GAUSSIANS_EPOCHS: usize = 50;
pub const FIVE_GAUSSIANS_SGD_LR: f64 = 0.01;

/// AE-CM settings for the small UCI tables on standardized features,
/// architecture `d-2K-d`, Adam at `1e-3` for [`UCI_EPOCHS`] epochs.
pub const UCI_PRESETS: [AecmPreset; 2] = [
    AecmPreset { name: "iris", alpha: 5.0, beta: 0.1, lambda: 0.01, batch_size: 16, p: 6 },
    AecmPreset { name: "wine", alpha: 5.0, beta: 0.1, lambda: 0.01, batch_size: 16, p: 6 },
];
pub const UCI_EPOCHS: usize = 300;

fn key(name: &str) -> String {
    let n = name.to_ascii_lowercase().replace('_', "-");
    match n.as_str() {
        "pendigit" => "pendigits".into(),
        "fashion-mnist" | "f-mnist" => "fmnist".into(),
        _ => n,
    }
}

pub fn cm_preset(name: &str) -> Option<CmPreset> {
    let k = key(name);
    CM_PRESETS.iter().copied().find(|p| p.name == k)
}

pub fn aecm_preset(name: &str) -> Option<AecmPreset> {
    let k = key(name);
    AECM_PRESETS.iter().chain(&UCI_PRESETS).copied().find(|p| p.name == k)
}

pub fn toy_preset(kind: ToyKind) -> ToyPreset {
    *TOY_PRESETS.iter().find(|p| p.kind == kind).expect("every toy kind has a preset")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        let p = cm_preset("Pendigit").unwrap();
        assert_eq!((p.alpha, p.batch_size), (13.0, 80));
        let a = aecm_preset("pendigits").unwrap();
        assert_eq!((a.alpha, a.beta, a.batch_size, a.p), (13.0, 0.5, 100, 10));
        assert!(AECM_PRESETS.iter().all(|p| p.lambda == 1.0));
        assert_eq!(toy_preset(ToyKind::Moons).hidden, &[20, 20, 20]);
        assert!(cm_preset("imagenet").is_none());
    }
}
