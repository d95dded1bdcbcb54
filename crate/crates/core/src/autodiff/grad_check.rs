use super::{Tape, Var};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Matrix;

/// Outcome of comparing reverse-mode gradients against central differences.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Worst error for each parameter tensor, in input order.
    pub max_rel_error: Vec<f64>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() <= self.tolerance
    }
}

/// Error measure used by the checker: `|a - b| / max(1, |a|, |b|)`.
pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Checks the gradient of `f` at `params` entry by entry.
///
/// `f` records a scalar loss on the given tape from the parameter
/// variables. The same closure drives both routes: one reverse sweep for
/// the analytic gradient, and `2 * len` forward evaluations for the
/// central differences with step `h`.
pub fn finite_diff_check<T, F>(f: F, params: &[Matrix<T>], h: f64, tol: f64) -> Result<GradCheckReport>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var>,
{
    let eval = |ps: &[Matrix<T>]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.scalar(loss).as_f64())
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut work: Vec<Matrix<T>> = params.to_vec();
    let mut max_rel_error = Vec::with_capacity(params.len());
    for (pi, v) in vars.iter().enumerate() {
        let analytic = grads.wrt(*v);
        let mut worst = 0.0f64;
        for e in 0..params[pi].len() {
            let orig = work[pi].as_slice()[e];
            work[pi].as_mut_slice()[e] = orig + T::of(h);
            let plus = eval(&work)?;
            work[pi].as_mut_slice()[e] = orig - T::of(h);
            let minus = eval(&work)?;
            work[pi].as_mut_slice()[e] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_error(analytic.as_slice()[e].as_f64(), numeric));
        }
        max_rel_error.push(worst);
    }
    Ok(GradCheckReport {
        max_rel_error,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{sample_uniform, Rng};

    #[test]
    fn quadratic_is_exact_up_to_roundoff() {
        let x = Matrix::from_rows(&[[0.3, -1.2, 2.0]]).unwrap();
        let report = finite_diff_check(
            |t, v| {
                let s = t.square(v[0])?;
                let s = t.scale(s, 3.0)?;
                t.sum(s)
            },
            &[x],
            1e-5,
            1e-9,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    fn mlp_loss(t: &mut Tape, v: &[Var], x: &Matrix) -> Result<Var> {
        let xv = t.constant(x.clone());
        let h1 = t.matmul(xv, v[0])?;
        let h1 = t.add_row_broadcast(h1, v[1])?;
        let h1 = t.leaky_relu(h1, 0.2)?;
        let h2 = t.matmul(h1, v[2])?;
        let h2 = t.leaky_relu(h2, 0.2)?;
        let out = t.matmul(h2, v[3])?;
        let out = t.row_softmax(out)?;
        let lg = t.log(out)?;
        let sq = t.square(lg)?;
        t.mean(sq)
    }

    #[test]
    fn three_layer_mlp_matches_finite_differences() {
        let mut rng = Rng::new(21);
        let x: Matrix = sample_uniform(&mut rng, 6, 4, -2.0, 2.0);
        let params: Vec<Matrix> = vec![
            sample_uniform(&mut rng, 4, 5, -1.0, 1.0),
            sample_uniform(&mut rng, 1, 5, -1.0, 1.0),
            sample_uniform(&mut rng, 5, 5, -1.0, 1.0),
            sample_uniform(&mut rng, 5, 3, -1.0, 1.0),
        ];
        let report = finite_diff_check(|t, v| mlp_loss(t, v, &x), &params, 1e-5, 1e-5).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn softmax_gradient_rows_orthogonal_to_ones() {
        let mut rng = Rng::new(4);
        let logits: Matrix = sample_uniform(&mut rng, 5, 4, -2.0, 2.0);
        let weights: Matrix = sample_uniform(&mut rng, 5, 4, -2.0, 2.0);
        let mut t = Tape::new();
        let z = t.param(logits);
        let s = t.row_softmax(z).unwrap();
        let w = t.constant(weights);
        let p = t.mul_elem(s, w).unwrap();
        let l = t.sum(p).unwrap();
        let g = t.backward(l).unwrap().wrt(z);
        for r in g.row_iter() {
            assert!(r.iter().sum::<f64>().abs() <= 1e-10);
        }
    }
}
