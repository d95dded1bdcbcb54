//! First-order optimisers over a flat list of parameter tensors.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    /// Adam with `(0.9, 0.999, 1e-8)`.
    pub const fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimiser state for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Optimizer<T: Scalar = f64> {
    kind: OptimizerKind,
    lr: T,
    steps: Vec<u32>,
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, params: &[&Matrix<T>]) -> Self {
        let zeros = |p: &&Matrix<T>| Matrix::zeros(p.rows(), p.cols());
        let (first, second) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adam { .. } => (params.iter().map(zeros).collect(), params.iter().map(zeros).collect()),
        };
        Optimizer {
            kind,
            lr: T::of(lr),
            steps: vec![0; params.len()],
            first,
            second,
        }
    }

    /// Updates `params[i]` with `grads[i]` for every `i` where `active[i]` holds.
    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[Matrix<T>], active: &[bool]) {
        debug_assert_eq!(params.len(), grads.len());
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            if !active.get(i).copied().unwrap_or(true) {
                continue;
            }
            self.steps[i] += 1;
            match self.kind {
                OptimizerKind::Sgd => {
                    p.axpy(-self.lr, g).expect("parameter and gradient shapes agree");
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
                    let t = self.steps[i] as i32;
                    let c1 = T::one() - b1.powi(t);
                    let c2 = T::one() - b2.powi(t);
                    let m = self.first[i].as_mut_slice();
                    let v = self.second[i].as_mut_slice();
                    for (((pv, &gv), mv), vv) in p.as_mut_slice().iter_mut().zip(g.as_slice()).zip(m).zip(v) {
                        *mv = b1 * *mv + (T::one() - b1) * gv;
                        *vv = b2 * *vv + (T::one() - b2) * gv * gv;
                        let mhat = *mv / c1;
                        let vhat = *vv / c2;
                        *pv -= self.lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut p = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let g = Matrix::from_rows(&[[0.5, -1.0]]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &[&p]);
        opt.step(&mut [&mut p], &[g], &[true]);
        assert_eq!(p.as_slice(), &[0.95, 2.1]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p: Matrix = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let g = Matrix::from_rows(&[[3.0, -0.25]]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.01, &[&p]);
        opt.step(&mut [&mut p], &[g], &[true]);
        assert!((p[(0, 0)] - 0.99).abs() < 1e-8);
        assert!((p[(0, 1)] - 2.01).abs() < 1e-8);
    }

    #[test]
    fn inactive_slots_untouched() {
        let mut a = Matrix::from_rows(&[[1.0]]).unwrap();
        let mut b = Matrix::from_rows(&[[1.0]]).unwrap();
        let g = Matrix::from_rows(&[[1.0]]).unwrap();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.1, &[&a, &b]);
        opt.step(&mut [&mut a, &mut b], &[g.clone(), g], &[false, true]);
        assert_eq!(a[(0, 0)], 1.0);
        assert!(b[(0, 0)] < 1.0);
    }
}
