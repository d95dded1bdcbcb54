//! Deep autoencoder with the clustering module nested at its bottleneck.
//!
//! `z = Enc(x)`, `(Γ, z̃) = CM(z)`, `x̃ = Dec(z)`. The joint loss is
//! `β Σ‖x−x̃‖² + Σ‖z−z̃‖² + Σ γ(1−γ) + Σ_k (1−α_k) log γ̃_k + λ ‖μμᵀ − I‖₁`.

mod loss;
mod train;

use serde::{Deserialize, Serialize};

pub use loss::{aecm_loss, aecm_loss_tape, ortho_penalty, AecmLossBreakdown, AecmTapeTerms};
pub use train::{pretrain, train_aecm, train_aecm_from, train_aecm_with_hook, AecmInit, AecmTrainConfig, AecmTrainResult, PretrainConfig};

use crate::autodiff::{Tape, Var};
use crate::cm::{cm_forward, extract_centroids, CmParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{sample_uniform, Matrix, Rng};

/// Negative-side slope of the hidden activations.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    LeakyRelu,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct MlpLayer<T = f64> {
    /// `in x out`
    pub weights: Matrix<T>,
    /// `1 x out`
    pub bias: Matrix<T>,
    pub activation: Activation,
}

impl<T: Scalar> MlpLayer<T> {
    /// Weights uniform in `±sqrt(6 / (in + out))`, zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        MlpLayer {
            weights: sample_uniform(rng, fan_in, fan_out, -limit, limit),
            bias: Matrix::zeros(1, fan_out),
            activation,
        }
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let h = x.matmul(&self.weights)?.add_row_broadcast(&self.bias)?;
        Ok(match self.activation {
            Activation::Linear => h,
            Activation::LeakyRelu => {
                let s = T::of(LEAKY_SLOPE);
                h.map(|v| if v > T::zero() { v } else { s * v })
            }
        })
    }
}

/// Fixed transformation applied to the inputs before the first encoder layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMap {
    #[default]
    Identity,
    /// `(x₁, x₂) ↦ (1, x₁, x₂, x₁², x₁x₂, x₂², x₂x₁)`
    Quadratic,
}

impl FeatureMap {
    pub fn output_dim(self, input_dim: usize) -> usize {
        match self {
            FeatureMap::Identity => input_dim,
            FeatureMap::Quadratic => 7,
        }
    }

    pub fn apply<T: Scalar>(self, x: &Matrix<T>) -> Result<Matrix<T>> {
        match self {
            FeatureMap::Identity => Ok(x.clone()),
            FeatureMap::Quadratic => quadratic_feature_layer(x),
        }
    }
}

/// Degree-two monomials of a two-column input, `N x 2 -> N x 7`.
pub fn quadratic_feature_layer<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    if x.cols() != 2 {
        return Err(Error::invalid(format!(
            "quadratic feature layer expects 2 columns, got {}",
            x.cols()
        )));
    }
    Ok(Matrix::from_fn(x.rows(), 7, |i, j| {
        let (a, b) = (x[(i, 0)], x[(i, 1)]);
        match j {
            0 => T::one(),
            1 => a,
            2 => b,
            3 => a * a,
            4 => a * b,
            5 => b * b,
            _ => b * a,
        }
    }))
}

/// Layer widths of an autoencoder `d → hidden… → p → reversed hidden… → d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    /// Embedding dimension.
    pub p: usize,
    #[serde(default)]
    pub feature_map: FeatureMap,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, p: usize) -> Self {
        Architecture {
            input_dim,
            hidden,
            p,
            feature_map: FeatureMap::Identity,
        }
    }

    pub fn with_feature_map(mut self, f: FeatureMap) -> Self {
        self.feature_map = f;
        self
    }

    fn encoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.feature_map.output_dim(self.input_dim)];
        dims.extend(&self.hidden);
        dims.push(self.p);
        dims
    }

    fn decoder_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.p];
        dims.extend(self.hidden.iter().rev());
        dims.push(self.input_dim);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.p == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        if self.feature_map == FeatureMap::Quadratic && self.input_dim != 2 {
            return Err(Error::invalid("the quadratic feature map needs 2-dimensional inputs"));
        }
        Ok(())
    }
}

fn build_layers<T: Scalar>(dims: &[usize], rng: &mut Rng) -> Vec<MlpLayer<T>> {
    let last = dims.len() - 2;
    dims.windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i == last { Activation::Linear } else { Activation::LeakyRelu };
            MlpLayer::glorot(w[0], w[1], act, rng)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct AecmParams<T = f64> {
    pub feature_map: FeatureMap,
    pub encoder: Vec<MlpLayer<T>>,
    pub decoder: Vec<MlpLayer<T>>,
    pub cm: CmParams<T>,
}

/// Tape variables of every parameter tensor.
#[derive(Clone, Debug)]
pub struct AecmVars {
    pub encoder: Vec<(Var, Var)>,
    pub decoder: Vec<(Var, Var)>,
    pub cm: [Var; 4],
}

impl AecmVars {
    /// Same order as [`AecmParams::tensors`].
    pub fn flat(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::new();
        for &(w, b) in self.encoder.iter().chain(&self.decoder) {
            out.push(w);
            out.push(b);
        }
        out.extend(self.cm);
        out
    }
}

impl<T: Scalar> AecmParams<T> {
    /// Glorot-initialised autoencoder with a random clustering module.
    pub fn random(arch: &Architecture, k: usize, rng: &mut Rng) -> Result<Self> {
        arch.validate()?;
        if k == 0 {
            return Err(Error::invalid("k must be positive"));
        }
        let encoder = build_layers(&arch.encoder_dims(), rng);
        let decoder = build_layers(&arch.decoder_dims(), rng);
        Ok(AecmParams {
            feature_map: arch.feature_map,
            encoder,
            decoder,
            cm: CmParams::random(arch.p, k, rng),
        })
    }

    pub fn k(&self) -> usize {
        self.cm.k()
    }

    pub fn p(&self) -> usize {
        self.cm.d()
    }

    pub fn input_dim(&self) -> usize {
        self.decoder.last().map_or(0, |l| l.weights.cols())
    }

    /// Encoder layers, then decoder layers (weights before bias), then the CM's four tensors.
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut out: Vec<&Matrix<T>> = Vec::new();
        for l in self.encoder.iter().chain(&self.decoder) {
            out.push(&l.weights);
            out.push(&l.bias);
        }
        out.extend(self.cm.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out: Vec<&mut Matrix<T>> = Vec::new();
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.push(&mut l.weights);
            out.push(&mut l.bias);
        }
        out.extend(self.cm.tensors_mut());
        out
    }

    /// Number of tensors belonging to the encoder and decoder.
    pub fn dae_tensor_count(&self) -> usize {
        2 * (self.encoder.len() + self.decoder.len())
    }

    /// Records all tensors on `tape`; `trainable_dae = false` records the
    /// autoencoder layers as constants.
    pub fn record(&self, tape: &mut Tape<T>, trainable_dae: bool) -> AecmVars {
        let mut leaf = |m: &Matrix<T>, train: bool| {
            if train {
                tape.param(m.clone())
            } else {
                tape.constant(m.clone())
            }
        };
        let encoder = self
            .encoder
            .iter()
            .map(|l| (leaf(&l.weights, trainable_dae), leaf(&l.bias, trainable_dae)))
            .collect();
        let decoder = self
            .decoder
            .iter()
            .map(|l| (leaf(&l.weights, trainable_dae), leaf(&l.bias, trainable_dae)))
            .collect();
        let cm = self.cm.tensors().map(|m| leaf(m, true));
        AecmVars { encoder, decoder, cm }
    }

    pub fn encode(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut h = self.feature_map.apply(x)?;
        for l in &self.encoder {
            h = l.forward(&h)?;
        }
        Ok(h)
    }

    pub fn decode(&self, z: &Matrix<T>) -> Result<Matrix<T>> {
        let mut h = z.clone();
        for l in &self.decoder {
            h = l.forward(&h)?;
        }
        Ok(h)
    }
}

pub(crate) fn record_mlp<T: Scalar>(
    tape: &mut Tape<T>,
    mut h: Var,
    layers: &[MlpLayer<T>],
    vars: &[(Var, Var)],
) -> Result<Var> {
    for (l, &(w, b)) in layers.iter().zip(vars) {
        h = tape.matmul(h, w)?;
        h = tape.add_row_broadcast(h, b)?;
        if l.activation == Activation::LeakyRelu {
            h = tape.leaky_relu(h, T::of(LEAKY_SLOPE))?;
        }
    }
    Ok(h)
}

#[derive(Clone, Debug)]
pub struct AecmForward<T = f64> {
    pub z: Matrix<T>,
    pub gamma: Matrix<T>,
    pub z_rec: Matrix<T>,
    pub x_rec: Matrix<T>,
}

pub fn aecm_forward<T: Scalar>(x: &Matrix<T>, p: &AecmParams<T>) -> Result<AecmForward<T>> {
    let z = p.encode(x)?;
    let f = cm_forward(&z, &p.cm)?;
    let x_rec = p.decode(&z)?;
    Ok(AecmForward {
        z,
        gamma: f.gamma,
        z_rec: f.x_rec,
        x_rec,
    })
}

pub fn predict<T: Scalar>(x: &Matrix<T>, p: &AecmParams<T>) -> Result<Vec<usize>> {
    Ok(aecm_forward(x, p)?.gamma.argmax_rows())
}

fn check_index(k: usize, kk: usize) -> Result<()> {
    if k >= kk {
        return Err(Error::invalid(format!("centroid index {k} out of range for K = {kk}")));
    }
    Ok(())
}

/// Input-space image `Dec(μ_k)` of centroid `k`.
pub fn decode_centroid<T: Scalar>(p: &AecmParams<T>, k: usize) -> Result<Vec<T>> {
    check_index(k, p.k())?;
    let mu = extract_centroids(&p.cm);
    Ok(p.decode(&mu.select_rows(&[k]))?.into_vec())
}

/// `Dec((1−t) μ_{k1} + t μ_{k2})` for `steps` evenly spaced `t ∈ [0, 1]`, one row each.
pub fn interpolate<T: Scalar>(p: &AecmParams<T>, k1: usize, k2: usize, steps: usize) -> Result<Matrix<T>> {
    check_index(k1, p.k())?;
    check_index(k2, p.k())?;
    if steps < 2 {
        return Err(Error::invalid("interpolation needs at least 2 steps"));
    }
    let mu = extract_centroids(&p.cm);
    let (a, b) = (mu.row(k1), mu.row(k2));
    let path = Matrix::from_fn(steps, p.p(), |i, j| {
        let t = T::of_usize(i) / T::of_usize(steps - 1);
        (T::one() - t) * a[j] + t * b[j]
    });
    p.decode(&path)
}
