use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Optimal one-to-one matching between rows and columns of a cost matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment<T = f64> {
    /// `(row, col)` pairs, sorted by row; `min(rows, cols)` of them.
    pub pairs: Vec<(usize, usize)>,
    /// Sum of the matched entries of the original matrix.
    pub cost: T,
}

/// Minimum-cost assignment (Kuhn–Munkres with row/column potentials, O(n³)).
///
/// A rectangular `r x c` matrix is padded to a square one with its
/// largest entry; padded pairs are dropped from the result.
pub fn hungarian<T: Scalar>(cost: &Matrix<T>) -> Assignment<T> {
    let (r, c) = cost.shape();
    if r == 0 || c == 0 {
        return Assignment {
            pairs: Vec::new(),
            cost: T::zero(),
        };
    }
    let n = r.max(c);
    let pad = cost
        .as_slice()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let a = |i: usize, j: usize| -> T {
        if i < r && j < c {
            cost[(i, j)]
        } else {
            pad
        }
    };

    let inf = T::infinity();
    // 1-based potentials; column 0 is a sentinel.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=n)
        .map(|j| (owner[j] - 1, j - 1))
        .filter(|&(i, j)| i < r && j < c)
        .collect();
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(i, j)| cost[(i, j)]).sum();
    Assignment { pairs, cost: total }
}
