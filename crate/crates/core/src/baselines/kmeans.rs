use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{sq_dist, Matrix, Rng};

/// k-means++ seeding: first centroid uniform over rows, each next one drawn
/// with probability proportional to the squared distance to the nearest
/// centroid chosen so far (uniform when all distances are zero).
pub fn kmeans_pp_init<T: Scalar>(x: &Matrix<T>, k: usize, rng: &mut Rng) -> Result<Matrix<T>> {
    let n = x.rows();
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds the {n} available points")));
    }
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.below(n));
    let mut nearest: Vec<f64> = x
        .row_iter()
        .map(|r| sq_dist(r, x.row(chosen[0])).as_f64())
        .collect();
    while chosen.len() < k {
        let next = rng.weighted_index(&nearest);
        chosen.push(next);
        let c = x.row(next);
        for (d, r) in nearest.iter_mut().zip(x.row_iter()) {
            *d = d.min(sq_dist(r, c).as_f64());
        }
    }
    Ok(x.select_rows(&chosen))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct KmeansResult<T = f64> {
    pub centroids: Matrix<T>,
    pub labels: Vec<usize>,
    /// Sum of squared distances to the assigned centroid.
    pub inertia: T,
    /// Inertia after every assignment step, the last entry equals `inertia`.
    pub inertia_trace: Vec<T>,
    /// Number of update steps that moved at least one centroid.
    pub moves: usize,
}

/// Nearest centroid of every row (lowest index on ties) and the total squared distance.
pub fn assign<T: Scalar>(x: &Matrix<T>, centroids: &Matrix<T>) -> (Vec<usize>, T) {
    let mut inertia = T::zero();
    let labels = x
        .row_iter()
        .map(|r| {
            let mut best = 0;
            let mut best_d = T::infinity();
            for (k, c) in centroids.row_iter().enumerate() {
                let d = sq_dist(r, c);
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            inertia += best_d;
            best
        })
        .collect();
    (labels, inertia)
}

/// Lloyd iterations from `init` until the largest centroid shift drops below
/// `tol` or `max_iter` updates have run.
///
/// An emptied cluster is re-seeded at the point farthest from its assigned
/// centroid.
pub fn lloyd<T: Scalar>(x: &Matrix<T>, init: &Matrix<T>, max_iter: usize, tol: f64) -> Result<KmeansResult<T>> {
    if init.cols() != x.cols() {
        return Err(Error::shape("lloyd", x.shape(), init.shape()));
    }
    let (k, d) = init.shape();
    let mut centroids = init.clone();
    let (mut labels, mut inertia) = assign(x, &centroids);
    let mut trace = vec![inertia];
    let mut moves = 0;

    for _ in 0..max_iter {
        let mut sums: Matrix<T> = Matrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (r, &l) in x.row_iter().zip(&labels) {
            counts[l] += 1;
            for (s, &v) in sums.row_mut(l).iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut next = centroids.clone();
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::of_usize(counts[c]);
                for (o, &s) in next.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *o = s * inv;
                }
            } else {
                let far = farthest_point(x, &centroids, &labels, &taken);
                taken.push(far);
                next.row_mut(c).copy_from_slice(x.row(far));
            }
        }
        let shift = (0..k)
            .map(|c| sq_dist(next.row(c), centroids.row(c)).sqrt())
            .fold(T::zero(), T::max);
        if shift > T::zero() {
            moves += 1;
        }
        centroids = next;
        let (l, i) = assign(x, &centroids);
        labels = l;
        inertia = i;
        trace.push(inertia);
        if shift.as_f64() < tol {
            break;
        }
    }
    Ok(KmeansResult {
        centroids,
        labels,
        inertia,
        inertia_trace: trace,
        moves,
    })
}

fn farthest_point<T: Scalar>(x: &Matrix<T>, centroids: &Matrix<T>, labels: &[usize], taken: &[usize]) -> usize {
    let mut best = 0;
    let mut best_d = T::neg_infinity();
    for (i, (r, &l)) in x.row_iter().zip(labels).enumerate() {
        if taken.contains(&i) {
            continue;
        }
        let dist = sq_dist(r, centroids.row(l));
        if dist > best_d {
            best_d = dist;
            best = i;
        }
    }
    best
}
