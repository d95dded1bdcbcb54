use super::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const PIVOT_FLOOR: f64 = 1e-12;
const RIDGE: f64 = 1e-10;
/// Largest acceptable `|w·P − I|` entry before declaring the input rank deficient.
const RESCUE_RESIDUAL: f64 = 1e-6;

/// Inverse of a square matrix by Gauss–Jordan elimination with partial pivoting.
///
/// Returns `None` when a pivot magnitude falls below `1e-12`.
fn gauss_jordan_inverse<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows();
    let mut work = a.clone();
    let mut inv = Matrix::identity(n);
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if work[(r, col)].abs() > work[(piv, col)].abs() {
                piv = r;
            }
        }
        if work[(piv, col)].abs().as_f64() < PIVOT_FLOOR {
            return None;
        }
        if piv != col {
            for j in 0..n {
                let (x, y) = (work[(col, j)], work[(piv, j)]);
                work[(col, j)] = y;
                work[(piv, j)] = x;
                let (x, y) = (inv[(col, j)], inv[(piv, j)]);
                inv[(col, j)] = y;
                inv[(piv, j)] = x;
            }
        }
        let p = work[(col, col)];
        for j in 0..n {
            work[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = work[(r, col)];
            if f == T::zero() {
                continue;
            }
            for j in 0..n {
                let wv = work[(col, j)];
                let iv = inv[(col, j)];
                work[(r, j)] -= f * wv;
                inv[(r, j)] -= f * iv;
            }
        }
    }
    Some(inv)
}

/// Inverse of a symmetric Gram matrix, retrying once with a `1e-10` ridge.
fn regularised_inverse<T: Scalar>(gram: &Matrix<T>) -> Result<Matrix<T>> {
    if let Some(inv) = gauss_jordan_inverse(gram) {
        return Ok(inv);
    }
    let mut ridged = gram.clone();
    for i in 0..ridged.rows() {
        ridged[(i, i)] += T::of(RIDGE);
    }
    gauss_jordan_inverse(&ridged)
        .ok_or_else(|| Error::Singular(format!("{}x{} Gram matrix", gram.rows(), gram.cols())))
}

/// Moore–Penrose pseudo-inverse of a full-rank `K x d` matrix through the normal equations.
///
/// With `K <= d` this is the right inverse `wᵀ(wwᵀ)⁻¹`, so `w·P = I_K`.
/// With `K > d` the left inverse `(wᵀw)⁻¹wᵀ` is returned instead, so `P·w = I_d`.
/// A rank-deficient input that the ridge cannot rescue yields [`Error::Singular`].
pub fn pseudo_inverse<T: Scalar>(w: &Matrix<T>) -> Result<Matrix<T>> {
    let (k, d) = w.shape();
    if k == 0 || d == 0 {
        return Err(Error::EmptyInput);
    }
    let (p, check) = if k <= d {
        let gram = w.matmul_t(w)?;
        let p = w.t_matmul(&regularised_inverse(&gram)?)?;
        let check = w.matmul(&p)?;
        (p, check)
    } else {
        let gram = w.t_matmul(w)?;
        let p = regularised_inverse(&gram)?.matmul_t(w)?;
        let check = p.matmul(w)?;
        (p, check)
    };
    let residual = check.max_abs_diff(&Matrix::identity(check.rows()))?;
    if residual.as_f64() > RESCUE_RESIDUAL {
        return Err(Error::Singular(format!(
            "{k}x{d} matrix is rank deficient (residual {:.3e})",
            residual.as_f64()
        )));
    }
    Ok(p)
}

/// Result of per-column standardisation.
#[derive(Clone, Debug)]
pub struct Standardized<T: Scalar = f64> {
    pub data: Matrix<T>,
    pub means: Vec<T>,
    /// Population standard deviations; columns below `1e-12` are only centred.
    pub stds: Vec<T>,
}

/// Centres every column and scales it to unit population variance.
pub fn standardize<T: Scalar>(x: &Matrix<T>) -> Standardized<T> {
    let n = T::of_usize(x.rows().max(1));
    let means = x.col_means().into_vec();
    let mut vars = vec![T::zero(); x.cols()];
    for r in x.row_iter() {
        for ((v, &xv), &m) in vars.iter_mut().zip(r).zip(&means) {
            let d = xv - m;
            *v += d * d;
        }
    }
    let stds: Vec<T> = vars.iter().map(|&v| (v / n).sqrt()).collect();
    let mut data = x.clone();
    for i in 0..data.rows() {
        for ((v, &m), &s) in data.row_mut(i).iter_mut().zip(&means).zip(&stds) {
            *v -= m;
            if s.as_f64() >= PIVOT_FLOOR {
                *v /= s;
            }
        }
    }
    Standardized { data, means, stds }
}
