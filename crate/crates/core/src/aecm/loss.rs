use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::{record_mlp, AecmForward, AecmParams, AecmVars};
use crate::autodiff::{Tape, Var};
use crate::cm::{check_alpha, descending, extract_centroids, prior_term, PriorMode, LOG_FLOOR};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, sq_dist, Matrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AecmLossBreakdown<T = f64> {
    /// `Σ‖x − x̃‖²`
    pub rec_dae: T,
    /// `Σ‖z − z̃‖²`
    pub rec_cm: T,
    /// `Σ γ(1−γ)`
    pub sparsity: T,
    /// `Σ_k (1−α_k) log γ̃_k`
    pub prior: T,
    /// `‖μμᵀ − I‖₁`
    pub ortho: T,
    /// `β rec_dae + rec_cm + sparsity + prior + λ ortho`
    pub total: T,
}

impl<T: Scalar> AecmLossBreakdown<T> {
    pub fn new(rec_dae: T, rec_cm: T, sparsity: T, prior: T, ortho: T, beta: f64, lambda: f64) -> Self {
        AecmLossBreakdown {
            rec_dae,
            rec_cm,
            sparsity,
            prior,
            ortho,
            total: T::of(beta) * rec_dae + rec_cm + sparsity + prior + T::of(lambda) * ortho,
        }
    }

    pub fn non_finite_term(&self) -> Option<&'static str> {
        [
            ("rec_dae", self.rec_dae),
            ("rec_cm", self.rec_cm),
            ("sparsity", self.sparsity),
            ("prior", self.prior),
            ("ortho", self.ortho),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

impl<T: Scalar> AddAssign for AecmLossBreakdown<T> {
    fn add_assign(&mut self, o: Self) {
        self.rec_dae += o.rec_dae;
        self.rec_cm += o.rec_cm;
        self.sparsity += o.sparsity;
        self.prior += o.prior;
        self.ortho += o.ortho;
        self.total += o.total;
    }
}

/// `Σ_{k,l} |μ_kᵀμ_l − δ_kl|` for centroids given as rows.
pub fn ortho_penalty<T: Scalar>(mu: &Matrix<T>) -> T {
    let k = mu.rows();
    let mut s = T::zero();
    for a in 0..k {
        for b in 0..k {
            let target = if a == b { T::one() } else { T::zero() };
            s += (dot(mu.row(a), mu.row(b)) - target).abs();
        }
    }
    s
}

/// Five-term breakdown of the joint loss by direct summation.
pub fn aecm_loss<T: Scalar>(
    x: &Matrix<T>,
    f: &AecmForward<T>,
    p: &AecmParams<T>,
    alpha: &[f64],
    beta: f64,
    lambda: f64,
    prior_mode: PriorMode,
) -> Result<AecmLossBreakdown<T>> {
    check_alpha(alpha, p.k())?;
    if x.shape() != f.x_rec.shape() {
        return Err(Error::shape("aecm_loss", x.shape(), f.x_rec.shape()));
    }
    let rec_dae = x.row_iter().zip(f.x_rec.row_iter()).map(|(a, b)| sq_dist(a, b)).sum();
    let rec_cm = f.z.row_iter().zip(f.z_rec.row_iter()).map(|(a, b)| sq_dist(a, b)).sum();
    let sparsity = f.gamma.as_slice().iter().map(|&g| g * (T::one() - g)).sum();
    let prior = prior_term(&f.gamma, alpha, prior_mode);
    let ortho = ortho_penalty(&extract_centroids(&p.cm));
    let out = AecmLossBreakdown::new(rec_dae, rec_cm, sparsity, prior, ortho, beta, lambda);
    if let Some(term) = out.non_finite_term() {
        return Err(Error::NonFinite { context: term.into() });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct AecmTapeTerms {
    pub z: Var,
    pub gamma: Var,
    pub rec_dae: Var,
    pub rec_cm: Var,
    pub sparsity: Var,
    pub prior: Var,
    pub ortho: Var,
    pub total: Var,
}

impl AecmTapeTerms {
    pub fn breakdown<T: Scalar>(&self, tape: &Tape<T>, beta: f64, lambda: f64) -> AecmLossBreakdown<T> {
        AecmLossBreakdown::new(
            tape.scalar(self.rec_dae),
            tape.scalar(self.rec_cm),
            tape.scalar(self.sparsity),
            tape.scalar(self.prior),
            tape.scalar(self.ortho),
            beta,
            lambda,
        )
    }
}

/// Records the joint forward pass and loss for the batch `x` (raw inputs,
/// before any feature map).
pub fn aecm_loss_tape<T: Scalar>(
    tape: &mut Tape<T>,
    x: &Matrix<T>,
    p: &AecmParams<T>,
    vars: &AecmVars,
    alpha: &[f64],
    beta: f64,
    lambda: f64,
    prior_mode: PriorMode,
) -> Result<AecmTapeTerms> {
    let k = p.k();
    check_alpha(alpha, k)?;
    let xv = tape.constant(x.clone());
    let input = tape.constant(p.feature_map.apply(x)?);
    let z = record_mlp(tape, input, &p.encoder, &vars.encoder)?;
    let x_rec = record_mlp(tape, z, &p.decoder, &vars.decoder)?;
    let diff = tape.sub(xv, x_rec)?;
    let sq = tape.square(diff)?;
    let rec_dae = tape.sum(sq)?;

    let [w_enc, b_enc, w_dec, b_dec] = vars.cm;
    let logits = tape.matmul(z, w_enc)?;
    let logits = tape.add_row_broadcast(logits, b_enc)?;
    let gamma = tape.row_softmax(logits)?;
    let z_rec = tape.matmul(gamma, w_dec)?;
    let z_rec = tape.add_row_broadcast(z_rec, b_dec)?;
    let dz = tape.sub(z, z_rec)?;
    let dz = tape.square(dz)?;
    let rec_cm = tape.sum(dz)?;

    let gg = tape.mul_elem(gamma, gamma)?;
    let gini = tape.sub(gamma, gg)?;
    let sparsity = tape.sum(gini)?;

    let mean = tape.mean_cols(gamma)?;
    let mean = tape.clamp_min(mean, T::of(LOG_FLOOR))?;
    let (mean, order) = match prior_mode {
        PriorMode::Symmetric => (mean, (0..k).collect::<Vec<_>>()),
        PriorMode::Sorted => {
            let values: Vec<f64> = tape.value(mean).as_slice().iter().map(|v| v.as_f64()).collect();
            let perm = descending(&values);
            (tape.permute_cols(mean, &perm)?, descending(alpha))
        }
    };
    let logs = tape.log(mean)?;
    let coef = tape.constant(Matrix::from_fn(1, k, |_, j| T::of(1.0 - alpha[order[j]])));
    let prior = tape.mul_elem(logs, coef)?;
    let prior = tape.sum(prior)?;

    let mu = tape.add_row_broadcast(w_dec, b_dec)?;
    let mu_t = tape.transpose(mu)?;
    let gram = tape.matmul(mu, mu_t)?;
    let eye = tape.constant(Matrix::identity(k));
    let dev = tape.sub(gram, eye)?;
    let dev = tape.abs(dev)?;
    let ortho = tape.sum(dev)?;

    let weighted_rec = tape.scale(rec_dae, T::of(beta))?;
    let weighted_ortho = tape.scale(ortho, T::of(lambda))?;
    let mut total = tape.add(weighted_rec, rec_cm)?;
    for v in [sparsity, prior, weighted_ortho] {
        total = tape.add(total, v)?;
    }
    Ok(AecmTapeTerms {
        z,
        gamma,
        rec_dae,
        rec_cm,
        sparsity,
        prior,
        ortho,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aecm::{aecm_forward, Architecture};
    use crate::tensor::{sample_uniform, Rng};

    #[test]
    fn ortho_examples() {
        let eye: Matrix = Matrix::identity(3);
        assert_eq!(ortho_penalty(&eye), 0.0);
        assert_eq!(ortho_penalty(&eye.scale(2.0)), 9.0);
    }

    #[test]
    fn tape_matches_direct_loss() {
        let mut rng = Rng::new(6);
        let arch = Architecture::new(4, vec![5], 3);
        let p: AecmParams = AecmParams::random(&arch, 2, &mut rng).unwrap();
        let x = sample_uniform(&mut rng, 6, 4, -1.0, 1.0);
        let alpha = [2.0, 0.5];
        let direct = aecm_loss(&x, &aecm_forward(&x, &p).unwrap(), &p, &alpha, 0.7, 1.3, PriorMode::Symmetric).unwrap();
        let mut tape = Tape::new();
        let vars = p.record(&mut tape, true);
        let t = aecm_loss_tape(&mut tape, &x, &p, &vars, &alpha, 0.7, 1.3, PriorMode::Symmetric).unwrap();
        let via = t.breakdown(&tape, 0.7, 1.3);
        assert!((direct.total - tape.scalar(t.total)).abs() < 1e-12);
        assert!((direct.total - via.total).abs() < 1e-12);
        assert!((direct.ortho - via.ortho).abs() < 1e-12);
    }
}
