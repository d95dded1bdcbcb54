use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::tensor::{Matrix, Rng};

/// Component means of the five-Gaussians set; every pair is at least 8 apart
/// and each component has unit isotropic spread.
pub const FIVE_GAUSSIAN_MEANS: [[f64; 2]; 5] = [[0.0, 0.0], [8.0, 0.0], [4.0, 7.0], [-4.0, 7.0], [-8.0, 0.0]];

/// `n` points in the plane from five equally weighted unit-variance
/// Gaussians; point `i` comes from component `i mod 5`.
pub fn gen_five_gaussians(n: usize, seed: u64) -> Result<Dataset> {
    if n < 5 {
        return Err(Error::invalid("five-gaussians needs at least 5 points"));
    }
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 5;
        let m = FIVE_GAUSSIAN_MEANS[c];
        data.push(m[0] + rng.normal());
        data.push(m[1] + rng.normal());
        labels.push(c);
    }
    Dataset::new("five-gaussians", Matrix::from_vec(n, 2, data)?, Some(labels))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToyKind {
    Moons,
    Circles,
    Blobs,
    Varied,
    Aniso,
    NoStructure,
}

impl ToyKind {
    pub const ALL: [ToyKind; 6] = [
        ToyKind::Moons,
        ToyKind::Circles,
        ToyKind::Blobs,
        ToyKind::Varied,
        ToyKind::Aniso,
        ToyKind::NoStructure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Moons => "moons",
            ToyKind::Circles => "circles",
            ToyKind::Blobs => "blobs",
            ToyKind::Varied => "varied",
            ToyKind::Aniso => "aniso",
            ToyKind::NoStructure => "no-structure",
        }
    }

    /// Gaussian noise std for moons/circles, spread multiplier for the blob family.
    pub fn default_noise(self) -> f64 {
        match self {
            ToyKind::Moons | ToyKind::Circles => 0.05,
            _ => 1.0,
        }
    }

    /// Number of generating groups.
    pub fn k(self) -> usize {
        match self {
            ToyKind::Moons | ToyKind::Circles => 2,
            ToyKind::NoStructure => 1,
            _ => 3,
        }
    }
}

impl FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('_', "-");
        ToyKind::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::invalid(format!("unknown toy dataset `{s}`")))
    }
}

const BLOB_CENTERS: [[f64; 2]; 3] = [[-6.0, -4.0], [0.0, 6.0], [6.0, -3.0]];
const VARIED_STDS: [f64; 3] = [1.0, 2.5, 0.5];
const ANISO_SHEAR: [[f64; 2]; 2] = [[0.6, -0.6], [-0.4, 0.8]];

/// Two-dimensional toy sets in the style of the scikit-learn clustering gallery.
///
/// `noise` defaults to [`ToyKind::default_noise`].
pub fn gen_toy(kind: ToyKind, n: usize, noise: Option<f64>, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::invalid("toy datasets need at least 2 points"));
    }
    let noise = noise.unwrap_or(kind.default_noise());
    if !(noise >= 0.0) {
        return Err(Error::invalid("noise must be non-negative"));
    }
    let mut rng = Rng::new(seed);
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    match kind {
        ToyKind::Moons => {
            let n_out = n / 2;
            let n_in = n - n_out;
            for i in 0..n_out {
                let t = PI * i as f64 / (n_out.max(2) - 1) as f64;
                pts.push([t.cos(), t.sin()]);
                labels.push(0);
            }
            for i in 0..n_in {
                let t = PI * i as f64 / (n_in.max(2) - 1) as f64;
                pts.push([1.0 - t.cos(), 1.0 - t.sin() - 0.5]);
                labels.push(1);
            }
            for p in &mut pts {
                p[0] += noise * rng.normal();
                p[1] += noise * rng.normal();
            }
        }
        ToyKind::Circles => {
            let n_out = n / 2;
            let n_in = n - n_out;
            for (count, radius, label) in [(n_out, 1.0, 0), (n_in, 0.5, 1)] {
                for i in 0..count {
                    let t = 2.0 * PI * i as f64 / count as f64;
                    pts.push([radius * t.cos(), radius * t.sin()]);
                    labels.push(label);
                }
            }
            if noise > 0.0 {
                for p in &mut pts {
                    p[0] += noise * rng.normal();
                    p[1] += noise * rng.normal();
                }
            }
        }
        ToyKind::Blobs | ToyKind::Varied | ToyKind::Aniso => {
            for i in 0..n {
                let c = i % 3;
                let std = noise * if kind == ToyKind::Varied { VARIED_STDS[c] } else { 1.0 };
                let m = BLOB_CENTERS[c];
                let p = [m[0] + std * rng.normal(), m[1] + std * rng.normal()];
                pts.push(if kind == ToyKind::Aniso {
                    [
                        p[0] * ANISO_SHEAR[0][0] + p[1] * ANISO_SHEAR[1][0],
                        p[0] * ANISO_SHEAR[0][1] + p[1] * ANISO_SHEAR[1][1],
                    ]
                } else {
                    p
                });
                labels.push(c);
            }
        }
        ToyKind::NoStructure => {
            for _ in 0..n {
                pts.push([rng.uniform(), rng.uniform()]);
                labels.push(0);
            }
        }
    }
    let features = Matrix::from_rows(&pts)?;
    Dataset::new(kind.name(), features, Some(labels))
}
