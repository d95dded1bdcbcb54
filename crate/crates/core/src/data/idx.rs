use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes.get(at..at + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Reads an IDX image file and its label file (MNIST layout); pixels are scaled to `[0, 1]`.
pub fn load_idx<T: Scalar>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = read(ip)?;
    let labels = read(lp)?;
    let bad = |path: &Path, msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };

    match be_u32(&images, 0) {
        Some(IMAGES_MAGIC) => {}
        m => return Err(bad(ip, format!("bad image magic {m:?}, expected 2051"))),
    }
    let header = |at| be_u32(&images, at).map(|v| v as usize).ok_or_else(|| bad(ip, "truncated header".into()));
    let (n, h, w) = (header(4)?, header(8)?, header(12)?);
    let d = h * w;
    let payload = &images[16..];
    if payload.len() != n * d {
        return Err(bad(ip, format!("header declares {n}x{h}x{w} pixels but payload has {} bytes", payload.len())));
    }

    match be_u32(&labels, 0) {
        Some(LABELS_MAGIC) => {}
        m => return Err(bad(lp, format!("bad label magic {m:?}, expected 2049"))),
    }
    let nl = be_u32(&labels, 4).ok_or_else(|| bad(lp, "truncated header".into()))? as usize;
    let lab = &labels[8..];
    if lab.len() != nl {
        return Err(bad(lp, format!("header declares {nl} labels but payload has {} bytes", lab.len())));
    }
    if nl != n {
        return Err(Error::LengthMismatch(n, nl));
    }

    let scale = T::one() / T::of(255.0);
    let data = payload.iter().map(|&b| T::of(b as f64) * scale).collect();
    let features = Matrix::from_vec(n, d, data)?;
    let name = ip
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, features, Some(lab.iter().map(|&b| b as usize).collect()))
}
