//! Datasets: CSV and IDX loaders, normalisation, bundled UCI tables and
//! synthetic generators.

mod csv_io;
mod generators;
mod idx;

use serde::{Deserialize, Serialize};

pub use csv_io::{load_csv, read_csv, save_csv};
pub use generators::{gen_five_gaussians, gen_toy, ToyKind, FIVE_GAUSSIAN_MEANS};
pub use idx::load_idx;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct Dataset<T = f64> {
    pub features: Matrix<T>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
    pub k_true: Option<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(name: impl Into<String>, features: Matrix<T>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(Error::LengthMismatch(features.rows(), l.len()));
            }
        }
        let k_true = labels.as_ref().map(|l| l.iter().max().map_or(0, |m| m + 1));
        Ok(Dataset {
            features,
            labels,
            name: name.into(),
            k_true,
        })
    }

    pub fn n(&self) -> usize {
        self.features.rows()
    }

    pub fn d(&self) -> usize {
        self.features.cols()
    }

    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            features: self.features.cast(),
            labels: self.labels.clone(),
            name: self.name.clone(),
            k_true: self.k_true,
        }
    }
}

/// Maps every column affinely onto `[0, 1]`; constant columns become 0.
pub fn minmax_normalize<T: Scalar>(x: &Matrix<T>) -> Matrix<T> {
    let (n, d) = x.shape();
    let mut out = x.clone();
    for j in 0..d {
        let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
        for i in 0..n {
            lo = lo.min(x[(i, j)]);
            hi = hi.max(x[(i, j)]);
        }
        let span = hi - lo;
        for i in 0..n {
            out[(i, j)] = if span > T::zero() {
                (x[(i, j)] - lo) / span
            } else {
                T::zero()
            };
        }
    }
    out
}

const IRIS: &str = include_str!("../../data/iris.csv");
const WINE: &str = include_str!("../../data/wine.csv");
const PENDIGITS: &str = include_str!("../../data/pendigits.csv");

fn bundled(name: &str, text: &str, label_column: usize) -> Dataset {
    let mut ds = read_csv(text.as_bytes(), name.as_ref(), true, Some(label_column)).expect("bundled table parses");
    ds.name = name.to_string();
    ds
}

/// Fisher's iris: 150 x 4, three classes.
pub fn iris() -> Dataset {
    bundled("iris", IRIS, 4)
}

/// UCI wine recognition: 178 x 13, three cultivars.
pub fn wine() -> Dataset {
    bundled("wine", WINE, 13)
}

/// Pen-based handwritten digits: 10992 x 16, ten classes, raw 0..100 coordinates.
pub fn pendigits() -> Dataset {
    bundled("pendigits", PENDIGITS, 16)
}

/// Bundled table by name (`iris`, `wine`, `pendigits`).
pub fn bundled_by_name(name: &str) -> Option<Dataset> {
    match name {
        "iris" => Some(iris()),
        "wine" => Some(wine()),
        "pendigits" | "pendigit" => Some(pendigits()),
        _ => None,
    }
}
