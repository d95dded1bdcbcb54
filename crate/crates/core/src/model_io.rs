//! Model files: one line of JSON describing the tensors, followed by their
//! values as little-endian `f64`, concatenated in the declared order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aecm::{Activation, AecmParams, FeatureMap, MlpLayer};
use crate::cm::CmParams;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

const FORMAT: &str = "aecm-model";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Cm(CmParams),
    Aecm(AecmParams),
}

impl Model {
    pub fn cm(&self) -> &CmParams {
        match self {
            Model::Cm(p) => p,
            Model::Aecm(p) => &p.cm,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    #[serde(default)]
    feature_map: FeatureMap,
    /// Activation of every encoder layer, then every decoder layer.
    #[serde(default)]
    encoder_activations: Vec<Activation>,
    #[serde(default)]
    decoder_activations: Vec<Activation>,
    tensors: Vec<TensorInfo>,
    /// Free-form training configuration, stored for reference.
    #[serde(default)]
    config: serde_json::Value,
}

fn named<'a>(model: &'a Model) -> Vec<(String, &'a Matrix)> {
    let cm = model.cm();
    let mut out = Vec::new();
    if let Model::Aecm(p) = model {
        for (side, layers) in [("encoder", &p.encoder), ("decoder", &p.decoder)] {
            for (i, l) in layers.iter().enumerate() {
                out.push((format!("{side}.{i}.weights"), &l.weights));
                out.push((format!("{side}.{i}.bias"), &l.bias));
            }
        }
    }
    for (n, m) in ["w_enc", "b_enc", "w_dec", "b_dec"].into_iter().zip(cm.tensors()) {
        out.push((format!("cm.{n}"), m));
    }
    out
}

/// Writes `model` with `config` embedded in the header.
pub fn save_model(path: impl AsRef<Path>, model: &Model, config: serde_json::Value) -> Result<()> {
    let path = path.as_ref();
    let tensors = named(model);
    let (kind, fm, enc, dec) = match model {
        Model::Cm(_) => ("cm", FeatureMap::Identity, vec![], vec![]),
        Model::Aecm(p) => (
            "aecm",
            p.feature_map,
            p.encoder.iter().map(|l| l.activation).collect(),
            p.decoder.iter().map(|l| l.activation).collect(),
        ),
    };
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        kind: kind.into(),
        feature_map: fm,
        encoder_activations: enc,
        decoder_activations: dec,
        tensors: tensors
            .iter()
            .map(|(n, m)| TensorInfo {
                name: n.clone(),
                rows: m.rows(),
                cols: m.cols(),
            })
            .collect(),
        config,
    };
    let mut bytes = serde_json::to_vec(&header).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    bytes.push(b'\n');
    for (_, m) in &tensors {
        for v in m.as_slice() {
            bytes.extend(v.to_le_bytes());
        }
    }
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    std::fs::File::create(path).map_err(io)?.write_all(&bytes).map_err(io)
}

/// Reads a model and the configuration stored with it.
pub fn load_model(path: impl AsRef<Path>) -> Result<(Model, serde_json::Value)> {
    let path = path.as_ref();
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let split = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("missing header line".into()))?;
    let header: Header = serde_json::from_slice(&bytes[..split]).map_err(|e| bad(e.to_string()))?;
    if header.format != FORMAT || header.version != VERSION {
        return Err(bad(format!("unsupported format {} v{}", header.format, header.version)));
    }
    let mut blob = &bytes[split + 1..];
    let mut mats = Vec::with_capacity(header.tensors.len());
    for t in &header.tensors {
        let len = t.rows * t.cols * 8;
        if blob.len() < len {
            return Err(bad(format!("tensor {} is truncated", t.name)));
        }
        let data = blob[..len]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        mats.push(Matrix::from_vec(t.rows, t.cols, data)?);
        blob = &blob[len..];
    }
    if !blob.is_empty() {
        return Err(bad(format!("{} trailing bytes", blob.len())));
    }
    let n_layers = header.encoder_activations.len() + header.decoder_activations.len();
    if mats.len() != 2 * n_layers + 4 {
        return Err(bad("tensor count does not match the declared layers".into()));
    }
    let mut it = mats.into_iter();
    let mut take_layers = |acts: &[Activation]| -> Vec<MlpLayer> {
        acts.iter()
            .map(|&activation| MlpLayer {
                weights: it.next().expect("counted"),
                bias: it.next().expect("counted"),
                activation,
            })
            .collect()
    };
    let encoder = take_layers(&header.encoder_activations);
    let decoder = take_layers(&header.decoder_activations);
    let cm = CmParams {
        w_enc: it.next().expect("counted"),
        b_enc: it.next().expect("counted"),
        w_dec: it.next().expect("counted"),
        b_dec: it.next().expect("counted"),
    };
    let model = match header.kind.as_str() {
        "cm" => Model::Cm(cm),
        "aecm" => Model::Aecm(AecmParams {
            feature_map: header.feature_map,
            encoder,
            decoder,
            cm,
        }),
        other => return Err(bad(format!("unknown model kind `{other}`"))),
    };
    Ok((model, header.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aecm::Architecture;
    use crate::tensor::Rng;

    #[test]
    fn round_trip_both_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(3);
        let arch = Architecture::new(2, vec![5], 3).with_feature_map(FeatureMap::Quadratic);
        let models = [
            Model::Cm(CmParams::random(4, 3, &mut rng)),
            Model::Aecm(AecmParams::random(&arch, 2, &mut rng).unwrap()),
        ];
        for (i, m) in models.iter().enumerate() {
            let path = dir.path().join(format!("m{i}.bin"));
            save_model(&path, m, serde_json::json!({"seed": i})).unwrap();
            let (back, cfg) = load_model(&path).unwrap();
            assert_eq!(&back, m);
            assert_eq!(cfg["seed"], i);
        }
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&path, &Model::Cm(CmParams::random(2, 2, &mut Rng::new(1))), serde_json::Value::Null).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format { .. })));
    }
}
