//! External clustering scores: ARI, NMI, ACC and homogeneity.
//!
//! Every function takes two label vectors of equal length. Label values are
//! arbitrary ids; only the induced partitions matter. Scores are raw values
//! in their natural range (multiply by 100 for table-style reporting).

mod hungarian;

use std::collections::BTreeMap;

pub use hungarian::{hungarian, Assignment};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Count table between two partitions of the same `n` points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contingency {
    /// `table[i][j]`: points with the i-th true class and j-th predicted cluster.
    pub table: Vec<Vec<usize>>,
    pub n: usize,
}

impl Contingency {
    pub fn new(labels_true: &[usize], labels_pred: &[usize]) -> Result<Self> {
        check_labels(labels_true, labels_pred)?;
        let rows = dense_ids(labels_true);
        let cols = dense_ids(labels_pred);
        let mut table = vec![vec![0usize; cols.len()]; rows.len()];
        for (t, p) in labels_true.iter().zip(labels_pred) {
            table[rows[t]][cols[p]] += 1;
        }
        Ok(Contingency {
            table,
            n: labels_true.len(),
        })
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.table.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        let cols = self.table.first().map_or(0, Vec::len);
        (0..cols)
            .map(|j| self.table.iter().map(|r| r[j]).sum())
            .collect()
    }
}

fn check_labels(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn dense_ids(labels: &[usize]) -> BTreeMap<usize, usize> {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0);
    }
    for (i, v) in ids.values_mut().enumerate() {
        *v = i;
    }
    ids
}

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Adjusted Rand index.
///
/// Returns 1 when the adjustment denominator vanishes, which only happens
/// when both partitions are the same trivial partition.
pub fn ari(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let c = Contingency::new(labels_true, labels_pred)?;
    if c.n < 2 {
        return Ok(1.0);
    }
    let index: f64 = c.table.iter().flatten().map(|&v| comb2(v)).sum();
    let sum_a: f64 = c.row_sums().into_iter().map(comb2).sum();
    let sum_b: f64 = c.col_sums().into_iter().map(comb2).sum();
    let expected = sum_a * sum_b / comb2(c.n);
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// Mutual information (nats) from a contingency table.
fn mutual_information(c: &Contingency) -> f64 {
    let n = c.n as f64;
    let a = c.row_sums();
    let b = c.col_sums();
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij == 0 {
                continue;
            }
            let nij = nij as f64;
            mi += nij / n * (n * nij / (a[i] as f64 * b[j] as f64)).ln();
        }
    }
    mi.max(0.0)
}

/// Normalized mutual information, `I(U;V) / sqrt(H(U) H(V))`.
pub fn nmi(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let c = Contingency::new(labels_true, labels_pred)?;
    let hu = entropy(&c.row_sums(), c.n);
    let hv = entropy(&c.col_sums(), c.n);
    match (hu == 0.0, hv == 0.0) {
        (true, true) => Ok(1.0),
        (true, false) | (false, true) => Ok(0.0),
        _ => Ok((mutual_information(&c) / (hu * hv).sqrt()).clamp(0.0, 1.0)),
    }
}

/// Clustering accuracy under the best injective cluster-to-class matching.
pub fn acc(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let c = Contingency::new(labels_true, labels_pred)?;
    let rows = c.table.len();
    let cols = c.table[0].len();
    let cost = Matrix::from_fn(rows, cols, |i, j| -(c.table[i][j] as f64));
    let matched: usize = hungarian(&cost)
        .pairs
        .iter()
        .map(|&(i, j)| c.table[i][j])
        .sum();
    Ok(matched as f64 / c.n as f64)
}

/// Homogeneity, `1 - H(true | pred) / H(true)`; 1 when `H(true) = 0`.
pub fn homogeneity(labels_true: &[usize], labels_pred: &[usize]) -> Result<f64> {
    let c = Contingency::new(labels_true, labels_pred)?;
    let h_true = entropy(&c.row_sums(), c.n);
    if h_true == 0.0 {
        return Ok(1.0);
    }
    let n = c.n as f64;
    let cluster_sizes = c.col_sums();
    let mut h_cond = 0.0;
    for row in &c.table {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                h_cond -= nij / n * (nij / cluster_sizes[j] as f64).ln();
            }
        }
    }
    Ok((1.0 - h_cond / h_true).clamp(0.0, 1.0))
}

/// All four scores at once.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Scores {
    pub ari: f64,
    pub nmi: f64,
    pub acc: f64,
    pub homogeneity: f64,
}

pub fn score_all(labels_true: &[usize], labels_pred: &[usize]) -> Result<Scores> {
    Ok(Scores {
        ari: ari(labels_true, labels_pred)?,
        nmi: nmi(labels_true, labels_pred)?,
        acc: acc(labels_true, labels_pred)?,
        homogeneity: homogeneity(labels_true, labels_pred)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_relabelled_partitions() {
        let t = [0, 0, 1, 1, 2, 2];
        let p = [2, 2, 0, 0, 1, 1];
        for f in [ari, nmi, acc, homogeneity] {
            assert_eq!(f(&t, &t).unwrap(), 1.0);
            assert!((f(&t, &p).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(ari(&[0, 1], &[0]), Err(Error::LengthMismatch(2, 1))));
        assert!(matches!(nmi(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn constant_prediction() {
        let t = [0, 0, 0, 1, 1];
        let p = [7, 7, 7, 7, 7];
        assert_eq!(nmi(&t, &p).unwrap(), 0.0);
        assert_eq!(homogeneity(&t, &p).unwrap(), 0.0);
        assert!((acc(&t, &p).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn independent_partitions_have_zero_nmi() {
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn over_clustering_keeps_homogeneity() {
        let t = [0, 0, 0, 0, 1, 1, 1, 1];
        let p = [0, 0, 1, 1, 2, 2, 3, 3];
        assert!((homogeneity(&t, &p).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trivial_partitions() {
        assert_eq!(ari(&[1, 1, 1], &[4, 4, 4]).unwrap(), 1.0);
        assert_eq!(nmi(&[1, 1, 1], &[4, 4, 4]).unwrap(), 1.0);
    }
}
