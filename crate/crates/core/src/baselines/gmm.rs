use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{sq_dist, Matrix, Rng};

use super::kmeans::kmeans_pp_init;

const JITTER: f64 = 1e-6;
const MAX_COLLAPSES: usize = 10;
const MIN_VARIANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceKind {
    /// `σ_k² I` per component, mixture weights fixed at `1/K`.
    Isotropic,
    /// Full SPD matrix per component, learned weights.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub enum Covariance<T = f64> {
    Isotropic(Vec<T>),
    Full(Vec<Matrix<T>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct GmmParams<T = f64> {
    pub weights: Vec<T>,
    pub means: Matrix<T>,
    pub covariance: Covariance<T>,
}

impl<T: Scalar> GmmParams<T> {
    pub fn k(&self) -> usize {
        self.means.rows()
    }

    pub fn kind(&self) -> CovarianceKind {
        match self.covariance {
            Covariance::Isotropic(_) => CovarianceKind::Isotropic,
            Covariance::Full(_) => CovarianceKind::Full,
        }
    }

    /// Uniform weights with the given means; spread taken from the data around them.
    pub fn from_means(x: &Matrix<T>, means: Matrix<T>, kind: CovarianceKind) -> Self {
        let k = means.rows();
        let d = x.cols();
        let weights = vec![T::one() / T::of_usize(k); k];
        let covariance = match kind {
            CovarianceKind::Isotropic => {
                let total: T = x
                    .row_iter()
                    .map(|r| {
                        means
                            .row_iter()
                            .map(|m| sq_dist(r, m))
                            .fold(T::infinity(), T::min)
                    })
                    .sum();
                let v = (total / T::of_usize(x.rows() * d)).max(T::of(JITTER));
                Covariance::Isotropic(vec![v; k])
            }
            CovarianceKind::Full => {
                let mean = x.col_means();
                let mut cov = Matrix::zeros(d, d);
                for r in x.row_iter() {
                    for a in 0..d {
                        let da = r[a] - mean[(0, a)];
                        for b in 0..d {
                            cov[(a, b)] += da * (r[b] - mean[(0, b)]);
                        }
                    }
                }
                let mut cov = cov.scale(T::one() / T::of_usize(x.rows()));
                for a in 0..d {
                    cov[(a, a)] += T::of(JITTER);
                }
                Covariance::Full(vec![cov; k])
            }
        };
        GmmParams {
            weights,
            means,
            covariance,
        }
    }

    /// Per-row log-density under each component plus log weight, `N x K`.
    fn joint_log_density(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let (n, d) = x.shape();
        let k = self.k();
        let log2pi = T::of((2.0 * std::f64::consts::PI).ln());
        let dd = T::of_usize(d);
        let half = T::of(0.5);
        let mut out = Matrix::zeros(n, k);
        match &self.covariance {
            Covariance::Isotropic(vars) => {
                for c in 0..k {
                    let v = vars[c];
                    let base = self.weights[c].ln() - half * dd * (log2pi + v.ln());
                    for i in 0..n {
                        out[(i, c)] = base - half * sq_dist(x.row(i), self.means.row(c)) / v;
                    }
                }
            }
            Covariance::Full(covs) => {
                for c in 0..k {
                    let l = cholesky(&covs[c]).ok_or_else(|| Error::Singular(format!("covariance of component {c}")))?;
                    let logdet = (0..d).map(|a| l[(a, a)].ln()).sum::<T>() * T::of(2.0);
                    let base = self.weights[c].ln() - half * (dd * log2pi + logdet);
                    let mut diff = vec![T::zero(); d];
                    for i in 0..n {
                        for a in 0..d {
                            diff[a] = x[(i, a)] - self.means[(c, a)];
                        }
                        forward_substitute(&l, &mut diff);
                        let maha: T = diff.iter().map(|&v| v * v).sum();
                        out[(i, c)] = base - half * maha;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Responsibilities and mean log-likelihood per point.
    pub fn e_step(&self, x: &Matrix<T>) -> Result<(Matrix<T>, T)> {
        let mut resp = self.joint_log_density(x)?;
        let mut total = T::zero();
        for i in 0..resp.rows() {
            let row = resp.row_mut(i);
            let m = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = m + row.iter().map(|&v| (v - m).exp()).sum::<T>().ln();
            for v in row.iter_mut() {
                *v = (*v - lse).exp();
            }
            total += lse;
        }
        let ll = total / T::of_usize(x.rows());
        if !ll.is_finite() {
            return Err(Error::NonFinite {
                context: "EM log-likelihood".into(),
            });
        }
        Ok((resp, ll))
    }

    /// Hard assignment: most responsible component per row.
    pub fn predict(&self, x: &Matrix<T>) -> Result<Vec<usize>> {
        Ok(self.e_step(x)?.0.argmax_rows())
    }
}

/// Lower Cholesky factor, `None` when the matrix is not positive definite.
fn cholesky<T: Scalar>(a: &Matrix<T>) -> Option<Matrix<T>> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if !(s > T::zero()) || !s.is_finite() {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` in place.
fn forward_substitute<T: Scalar>(l: &Matrix<T>, b: &mut [T]) {
    for i in 0..b.len() {
        let mut s = b[i];
        for p in 0..i {
            s -= l[(i, p)] * b[p];
        }
        b[i] = s / l[(i, i)];
    }
}

#[derive(Clone, Debug)]
pub enum GmmInit<T = f64> {
    /// Means from k-means++ seeding.
    KmeansPlusPlus,
    /// Means at `K` distinct uniformly chosen rows.
    RandomRows,
    Given(GmmParams<T>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Stop once the mean log-likelihood per point improves by less than this.
    pub tol: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iter: 150,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EmResult<T = f64> {
    pub params: GmmParams<T>,
    pub responsibilities: Matrix<T>,
    /// Mean log-likelihood per point after every E-step.
    pub loglik_trace: Vec<T>,
    pub converged: bool,
}

impl<T: Scalar> EmResult<T> {
    pub fn labels(&self) -> Vec<usize> {
        self.responsibilities.argmax_rows()
    }
}

/// Expectation–maximisation for a Gaussian mixture.
pub fn em_gmm<T: Scalar>(
    x: &Matrix<T>,
    k: usize,
    kind: CovarianceKind,
    init: GmmInit<T>,
    config: EmConfig,
    rng: &mut Rng,
) -> Result<EmResult<T>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut params = match init {
        GmmInit::KmeansPlusPlus => GmmParams::from_means(x, kmeans_pp_init(x, k, rng)?, kind),
        GmmInit::RandomRows => {
            if k > x.rows() {
                return Err(Error::invalid(format!("k = {k} exceeds the {} available points", x.rows())));
            }
            let idx: Vec<usize> = rng.permutation(x.rows()).into_iter().take(k).collect();
            GmmParams::from_means(x, x.select_rows(&idx), kind)
        }
        GmmInit::Given(p) => {
            if p.k() != k || p.means.cols() != x.cols() || p.kind() != kind {
                return Err(Error::invalid("initial GMM parameters do not match k, d or covariance kind"));
            }
            p
        }
    };
    let mut collapses = vec![0usize; k];
    let (mut resp, mut ll) = params.e_step(x)?;
    let mut trace = vec![ll];
    let mut converged = false;
    for _ in 0..config.max_iter {
        let before: usize = collapses.iter().sum();
        params = m_step(x, &resp, &params, &mut collapses)?;
        let jittered = collapses.iter().sum::<usize>() > before;
        let (r, next) = params.e_step(x)?;
        let gain = next - ll;
        resp = r;
        ll = next;
        trace.push(ll);
        if !jittered && gain.as_f64() < config.tol {
            converged = true;
            break;
        }
    }
    Ok(EmResult {
        params,
        responsibilities: resp,
        loglik_trace: trace,
        converged,
    })
}

fn note_collapse(collapses: &mut [usize], c: usize) -> Result<()> {
    collapses[c] += 1;
    log::debug!("EM component {c} collapsed ({} so far), adding jitter", collapses[c]);
    if collapses[c] >= MAX_COLLAPSES {
        return Err(Error::DegenerateComponent {
            component: c,
            collapses: collapses[c],
        });
    }
    Ok(())
}

fn m_step<T: Scalar>(
    x: &Matrix<T>,
    resp: &Matrix<T>,
    prev: &GmmParams<T>,
    collapses: &mut [usize],
) -> Result<GmmParams<T>> {
    let (n, d) = x.shape();
    let k = prev.k();
    let nk = resp.col_sums();
    let tiny = T::of(MIN_VARIANCE);
    let jitter = T::of(JITTER);

    let mut means = prev.means.clone();
    let weighted = resp.t_matmul(x)?;
    for c in 0..k {
        if nk[(0, c)] > tiny {
            let inv = T::one() / nk[(0, c)];
            for (m, &w) in means.row_mut(c).iter_mut().zip(weighted.row(c)) {
                *m = w * inv;
            }
        }
    }

    let covariance = match prev.kind() {
        CovarianceKind::Isotropic => {
            let mut vars = vec![T::zero(); k];
            for c in 0..k {
                let mass = nk[(0, c)];
                let mut v = if mass > tiny {
                    let s: T = (0..n).map(|i| resp[(i, c)] * sq_dist(x.row(i), means.row(c))).sum();
                    s / (mass * T::of_usize(d))
                } else {
                    T::zero()
                };
                if !(v > tiny) {
                    note_collapse(collapses, c)?;
                    v += jitter;
                }
                vars[c] = v;
            }
            Covariance::Isotropic(vars)
        }
        CovarianceKind::Full => {
            let mut covs = Vec::with_capacity(k);
            for c in 0..k {
                let mass = nk[(0, c)];
                let mut cov = Matrix::zeros(d, d);
                if mass > tiny {
                    let mut diff = vec![T::zero(); d];
                    for i in 0..n {
                        let g = resp[(i, c)];
                        for a in 0..d {
                            diff[a] = x[(i, a)] - means[(c, a)];
                        }
                        for a in 0..d {
                            let ga = g * diff[a];
                            for b in 0..=a {
                                cov[(a, b)] += ga * diff[b];
                            }
                        }
                    }
                    for a in 0..d {
                        for b in 0..=a {
                            let v = cov[(a, b)] / mass;
                            cov[(a, b)] = v;
                            cov[(b, a)] = v;
                        }
                    }
                }
                while cholesky(&cov).is_none() {
                    note_collapse(collapses, c)?;
                    for a in 0..d {
                        cov[(a, a)] += jitter;
                    }
                }
                covs.push(cov);
            }
            Covariance::Full(covs)
        }
    };

    let weights = match prev.kind() {
        CovarianceKind::Isotropic => prev.weights.clone(),
        CovarianceKind::Full => {
            let floor = T::of(1e-12);
            let w: Vec<T> = (0..k).map(|c| (nk[(0, c)] / T::of_usize(n)).max(floor)).collect();
            let total: T = w.iter().copied().sum();
            w.into_iter().map(|v| v / total).collect()
        }
    };
    Ok(GmmParams {
        weights,
        means,
        covariance,
    })
}
