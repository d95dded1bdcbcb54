use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::{extract_centroids, CmParams};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, sq_dist, Matrix};

/// Floor applied to the average responsibilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorMode {
    /// `α_k` paired with `γ̃_k`.
    #[default]
    Symmetric,
    /// Both `α` and `γ̃` sorted in decreasing order before pairing, so the
    /// largest concentration always goes to the most used cluster.
    Sorted,
}

/// Multipliers on the four loss terms, all 1 for the standard loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub rec: f64,
    pub gini: f64,
    pub cross: f64,
    pub prior: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rec: 1.0,
            gini: 1.0,
            cross: 1.0,
            prior: 1.0,
        }
    }
}

impl LossWeights {
    pub fn without_rec() -> Self {
        LossWeights {
            rec: 0.0,
            ..Self::default()
        }
    }

    pub fn without_cross() -> Self {
        LossWeights {
            cross: 0.0,
            ..Self::default()
        }
    }

    /// Cross term scaled by `factor`.
    pub fn cross_scaled(factor: f64) -> Self {
        LossWeights {
            cross: factor,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CmLossBreakdown<T = f64> {
    pub e_rec: T,
    pub e_gini: T,
    pub e_cross: T,
    pub e_prior: T,
    /// `e_rec + e_gini − e_cross + e_prior`
    pub total: T,
}

impl<T: Scalar> CmLossBreakdown<T> {
    pub fn new(e_rec: T, e_gini: T, e_cross: T, e_prior: T) -> Self {
        CmLossBreakdown {
            e_rec,
            e_gini,
            e_cross,
            e_prior,
            total: e_rec + e_gini - e_cross + e_prior,
        }
    }

    /// The loss actually minimised under `w`.
    pub fn weighted(&self, w: &LossWeights) -> T {
        T::of(w.rec) * self.e_rec + T::of(w.gini) * self.e_gini - T::of(w.cross) * self.e_cross
            + T::of(w.prior) * self.e_prior
    }

    /// Name of the first non-finite term, if any.
    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("e_rec", self.e_rec),
            ("e_gini", self.e_gini),
            ("e_cross", self.e_cross),
            ("e_prior", self.e_prior),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

impl<T: Scalar> AddAssign for CmLossBreakdown<T> {
    fn add_assign(&mut self, o: Self) {
        self.e_rec += o.e_rec;
        self.e_gini += o.e_gini;
        self.e_cross += o.e_cross;
        self.e_prior += o.e_prior;
        self.total += o.total;
    }
}

pub(crate) fn check_alpha(alpha: &[f64], k: usize) -> Result<()> {
    if alpha.len() != k {
        return Err(Error::invalid(format!("alpha has {} entries for K = {k}", alpha.len())));
    }
    if alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
        return Err(Error::invalid("alpha entries must be positive and finite"));
    }
    Ok(())
}

pub(crate) fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// `Σ_k (1−α_k) log max(γ̃_k, floor)` for batch-mean responsibilities `γ̃`.
pub(crate) fn prior_term<T: Scalar>(gamma: &Matrix<T>, alpha: &[f64], mode: PriorMode) -> T {
    let floor = T::of(LOG_FLOOR);
    let g: Vec<T> = gamma.col_means().into_vec().into_iter().map(|v| v.max(floor)).collect();
    let (gi, ai) = match mode {
        PriorMode::Symmetric => ((0..g.len()).collect(), (0..g.len()).collect()),
        PriorMode::Sorted => (
            descending(&g.iter().map(|v| v.as_f64()).collect::<Vec<_>>()),
            descending(alpha),
        ),
    };
    gi.iter()
        .zip(&ai)
        .map(|(&a, &b)| T::of(1.0 - alpha[b]) * g[a].ln())
        .sum()
}

/// Four-term breakdown of the clustering loss for one batch, by direct summation.
pub fn cm_loss<T: Scalar>(
    x: &Matrix<T>,
    gamma: &Matrix<T>,
    x_rec: &Matrix<T>,
    p: &CmParams<T>,
    alpha: &[f64],
    prior_mode: PriorMode,
) -> Result<CmLossBreakdown<T>> {
    let k = p.k();
    check_alpha(alpha, k)?;
    if x.shape() != x_rec.shape() {
        return Err(Error::shape("cm_loss", x.shape(), x_rec.shape()));
    }
    if gamma.shape() != (x.rows(), k) {
        return Err(Error::shape("cm_loss", gamma.shape(), (x.rows(), k)));
    }
    let mu = extract_centroids(p);
    let norms: Vec<T> = mu.row_iter().map(|m| dot(m, m)).collect();

    let e_rec: T = x.row_iter().zip(x_rec.row_iter()).map(|(a, b)| sq_dist(a, b)).sum();
    let mut e_gini = T::zero();
    let mut e_cross = T::zero();
    for g in gamma.row_iter() {
        for a in 0..k {
            e_gini += g[a] * (T::one() - g[a]) * norms[a];
            for b in 0..k {
                if a != b {
                    e_cross += g[a] * g[b] * dot(mu.row(a), mu.row(b));
                }
            }
        }
    }
    let e_prior = prior_term(gamma, alpha, prior_mode);
    let out = CmLossBreakdown::new(e_rec, e_gini, e_cross, e_prior);
    if let Some(term) = out.non_finite_term() {
        return Err(Error::NonFinite { context: term.into() });
    }
    Ok(out)
}

/// Variables of the loss recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct CmTapeTerms {
    pub gamma: Var,
    pub x_rec: Var,
    pub e_rec: Var,
    pub e_gini: Var,
    pub e_cross: Var,
    pub e_prior: Var,
    /// The weighted objective.
    pub objective: Var,
}

impl CmTapeTerms {
    pub fn breakdown<T: Scalar>(&self, tape: &Tape<T>) -> CmLossBreakdown<T> {
        CmLossBreakdown::new(
            tape.scalar(self.e_rec),
            tape.scalar(self.e_gini),
            tape.scalar(self.e_cross),
            tape.scalar(self.e_prior),
        )
    }
}

/// Records the forward pass and the weighted loss on `tape`.
///
/// `params` are the tape variables of `(w_enc, b_enc, w_dec, b_dec)`.
pub fn cm_loss_tape<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    params: [Var; 4],
    alpha: &[f64],
    prior_mode: PriorMode,
    weights: &LossWeights,
) -> Result<CmTapeTerms> {
    let [w_enc, b_enc, w_dec, b_dec] = params;
    let k = w_dec.shape().0;
    check_alpha(alpha, k)?;

    let logits = tape.matmul(x, w_enc)?;
    let logits = tape.add_row_broadcast(logits, b_enc)?;
    let gamma = tape.row_softmax(logits)?;
    let x_rec = tape.matmul(gamma, w_dec)?;
    let x_rec = tape.add_row_broadcast(x_rec, b_dec)?;

    let diff = tape.sub(x, x_rec)?;
    let sq = tape.square(diff)?;
    let e_rec = tape.sum(sq)?;

    let mu = tape.add_row_broadcast(w_dec, b_dec)?;
    let mu_sq = tape.square(mu)?;
    let norms = tape.sum_rows(mu_sq)?;
    let gg = tape.mul_elem(gamma, gamma)?;
    let gini = tape.sub(gamma, gg)?;
    let gini = tape.matmul(gini, norms)?;
    let e_gini = tape.sum(gini)?;

    // Σ_{k≠l} γ_k γ_l μ_kᵀμ_l = Σ (Γ M) ⊙ Γ − Σ Γ² ‖μ‖², with M = μμᵀ.
    let mu_t = tape.transpose(mu)?;
    let gram = tape.matmul(mu, mu_t)?;
    let gm = tape.matmul(gamma, gram)?;
    let full = tape.mul_elem(gm, gamma)?;
    let full = tape.sum(full)?;
    let diag = tape.matmul(gg, norms)?;
    let diag = tape.sum(diag)?;
    let e_cross = tape.sub(full, diag)?;

    let mean = tape.mean_cols(gamma)?;
    let mean = tape.clamp_min(mean, T::of(LOG_FLOOR))?;
    let (mean, alpha_order) = match prior_mode {
        PriorMode::Symmetric => (mean, (0..k).collect::<Vec<_>>()),
        PriorMode::Sorted => {
            let values: Vec<f64> = tape.value(mean).as_slice().iter().map(|v| v.as_f64()).collect();
            let perm = descending(&values);
            (tape.permute_cols(mean, &perm)?, descending(alpha))
        }
    };
    let logs = tape.log(mean)?;
    let coef = tape.constant(Matrix::from_fn(1, k, |_, j| T::of(1.0 - alpha[alpha_order[j]])));
    let prior = tape.mul_elem(logs, coef)?;
    let e_prior = tape.sum(prior)?;

    let mut parts = Vec::with_capacity(4);
    for (v, w) in [(e_rec, weights.rec), (e_gini, weights.gini), (e_cross, -weights.cross), (e_prior, weights.prior)] {
        if w != 0.0 {
            parts.push(if w == 1.0 { v } else { tape.scale(v, T::of(w))? });
        }
    }
    let mut objective = match parts.first() {
        Some(&v) => v,
        None => tape.scale(e_rec, T::zero())?,
    };
    for &v in &parts[1.min(parts.len())..] {
        objective = tape.add(objective, v)?;
    }
    Ok(CmTapeTerms {
        gamma,
        x_rec,
        e_rec,
        e_gini,
        e_cross,
        e_prior,
        objective,
    })
}
