use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{row_softmax, Matrix};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    id: usize,
    rows: usize,
    cols: usize,
}

impl Var {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn id(&self) -> usize {
        self.id
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    MulElem(usize, usize),
    MatMul(usize, usize),
    AddRowBroadcast(usize, usize),
    Scale(usize, T),
    Square(usize),
    Sum(usize),
    Mean(usize),
    Log(usize),
    Abs(usize),
    LeakyRelu(usize, T),
    RowSoftmax(usize),
    Transpose(usize),
    SumRows(usize),
    SumCols(usize),
    ClampMin(usize, T),
    PermuteCols(usize, Vec<usize>),
}

#[derive(Debug)]
struct Node<T: Scalar> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Append-only record of a forward computation for reverse-mode differentiation.
///
/// Nodes are stored in creation order, so parents always precede children.
/// A tape supports exactly one [`Tape::backward`] call.
#[derive(Debug)]
pub struct Tape<T: Scalar = f64> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::with_capacity(64),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        let (rows, cols) = value.shape();
        let id = self.nodes.len();
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var { id, rows, cols }
    }

    fn record(&mut self, value: Matrix<T>, op: Op<T>, parents: &[usize], name: &str) -> Result<Var> {
        let value = value.ensure_finite(name)?;
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        Ok(self.push(value, op, needs_grad))
    }

    /// Records a differentiable leaf (a parameter).
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient (data, fixed targets).
    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.id].value
    }

    /// Value of a `1 x 1` variable.
    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.id].value[(0, 0)]
    }

    fn val(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.id].value
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.val(a).add(self.val(b))?;
        self.record(out, Op::Add(a.id, b.id), &[a.id, b.id], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.val(a).sub(self.val(b))?;
        self.record(out, Op::Sub(a.id, b.id), &[a.id, b.id], "sub")
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.val(a).mul_elem(self.val(b))?;
        self.record(out, Op::MulElem(a.id, b.id), &[a.id, b.id], "mul_elem")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.val(a).matmul(self.val(b))?;
        self.record(out, Op::MatMul(a.id, b.id), &[a.id, b.id], "matmul")
    }

    /// Adds the `1 x cols` variable `row` to every row of `a`.
    pub fn add_row_broadcast(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.val(a).add_row_broadcast(self.val(row))?;
        self.record(out, Op::AddRowBroadcast(a.id, row.id), &[a.id, row.id], "add_row_broadcast")
    }

    pub fn scale(&mut self, a: Var, s: T) -> Result<Var> {
        let out = self.val(a).scale(s);
        self.record(out, Op::Scale(a.id, s), &[a.id], "scale")
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = self.val(a).map(|v| v * v);
        self.record(out, Op::Square(a.id), &[a.id], "square")
    }

    /// Sum of all entries, as a `1 x 1` variable.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Matrix::filled(1, 1, self.val(a).sum());
        self.record(out, Op::Sum(a.id), &[a.id], "sum")
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let out = Matrix::filled(1, 1, self.val(a).mean());
        self.record(out, Op::Mean(a.id), &[a.id], "mean")
    }

    /// Natural logarithm; every entry must be strictly positive.
    pub fn log(&mut self, a: Var) -> Result<Var> {
        let x = self.val(a);
        if let Some(bad) = x.as_slice().iter().find(|&&v| v <= T::zero()) {
            return Err(Error::Domain {
                op: "log",
                msg: format!("non-positive argument {bad}"),
            });
        }
        let out = x.map(|v| v.ln());
        self.record(out, Op::Log(a.id), &[a.id], "log")
    }

    /// Entrywise absolute value, subgradient 0 at 0.
    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let out = self.val(a).map(|v| v.abs());
        self.record(out, Op::Abs(a.id), &[a.id], "abs")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Result<Var> {
        let out = self.val(a).map(|v| if v > T::zero() { v } else { slope * v });
        self.record(out, Op::LeakyRelu(a.id, slope), &[a.id], "leaky_relu")
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let out = row_softmax(self.val(a))?;
        self.record(out, Op::RowSoftmax(a.id), &[a.id], "row_softmax")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.val(a).transpose();
        self.record(out, Op::Transpose(a.id), &[a.id], "transpose")
    }

    /// Per-row sums: `N x K -> N x 1`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let out = self.val(a).row_sums();
        self.record(out, Op::SumRows(a.id), &[a.id], "sum_rows")
    }

    /// Per-column sums: `N x K -> 1 x K`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let out = self.val(a).col_sums();
        self.record(out, Op::SumCols(a.id), &[a.id], "sum_cols")
    }

    /// Per-column means: `N x K -> 1 x K`.
    pub fn mean_cols(&mut self, a: Var) -> Result<Var> {
        let n = T::of_usize(a.rows.max(1));
        let s = self.sum_cols(a)?;
        self.scale(s, T::one() / n)
    }

    /// `max(a, floor)` entrywise; clamped entries pass no gradient.
    pub fn clamp_min(&mut self, a: Var, floor: T) -> Result<Var> {
        let out = self.val(a).map(|v| if v > floor { v } else { floor });
        self.record(out, Op::ClampMin(a.id, floor), &[a.id], "clamp_min")
    }

    /// Reorders columns: output column `j` is input column `perm[j]`.
    pub fn permute_cols(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let x = self.val(a);
        if perm.len() != x.cols() || perm.iter().any(|&p| p >= x.cols()) {
            return Err(Error::invalid(format!(
                "permutation of length {} for {} columns",
                perm.len(),
                x.cols()
            )));
        }
        let out = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, perm[j])]);
        self.record(out, Op::PermuteCols(a.id, perm.to_vec()), &[a.id], "permute_cols")
    }

    /// Reverse sweep from a scalar `loss`; may be called once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        if loss.shape() != (1, 1) {
            return Err(Error::NotScalar {
                rows: loss.rows,
                cols: loss.cols,
            });
        }
        self.consumed = true;
        let mut grads: Vec<Option<Matrix<T>>> = vec![None; self.nodes.len()];
        grads[loss.id] = Some(Matrix::ones(1, 1));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.needs_grad {
                continue;
            }
            let nodes = &self.nodes;
            let wants = |p: usize| nodes[p].needs_grad;
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    if wants(*b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                    if wants(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Sub(a, b) => {
                    if wants(*b) {
                        accumulate(&mut grads, *b, g.scale(-T::one()));
                    }
                    if wants(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::MulElem(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads, *a, g.mul_elem(&nodes[*b].value)?);
                    }
                    if wants(*b) {
                        accumulate(&mut grads, *b, g.mul_elem(&nodes[*a].value)?);
                    }
                }
                Op::MatMul(a, b) => {
                    if wants(*a) {
                        accumulate(&mut grads, *a, g.matmul_t(&nodes[*b].value)?);
                    }
                    if wants(*b) {
                        accumulate(&mut grads, *b, nodes[*a].value.t_matmul(&g)?);
                    }
                }
                Op::AddRowBroadcast(a, r) => {
                    if wants(*r) {
                        accumulate(&mut grads, *r, g.col_sums());
                    }
                    if wants(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.scale(*s)),
                Op::Square(a) => {
                    let x = &nodes[*a].value;
                    let two = T::of(2.0);
                    accumulate(&mut grads, *a, g.mul_elem(x)?.scale(two));
                }
                Op::Sum(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g[(0, 0)]));
                }
                Op::Mean(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    let v = g[(0, 0)] / T::of_usize((r * c).max(1));
                    accumulate(&mut grads, *a, Matrix::filled(r, c, v));
                }
                Op::Log(a) => {
                    let x = &nodes[*a].value;
                    let d = Matrix::from_fn(x.rows(), x.cols(), |i, j| g[(i, j)] / x[(i, j)]);
                    accumulate(&mut grads, *a, d);
                }
                Op::Abs(a) => {
                    let x = &nodes[*a].value;
                    let d = Matrix::from_fn(x.rows(), x.cols(), |i, j| g[(i, j)] * sign(x[(i, j)]));
                    accumulate(&mut grads, *a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let x = &nodes[*a].value;
                    let d = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                        if x[(i, j)] > T::zero() {
                            g[(i, j)]
                        } else {
                            *slope * g[(i, j)]
                        }
                    });
                    accumulate(&mut grads, *a, d);
                }
                Op::RowSoftmax(a) => {
                    let s = &node.value;
                    let mut d = Matrix::zeros(s.rows(), s.cols());
                    for i in 0..s.rows() {
                        let (sr, gr) = (s.row(i), g.row(i));
                        let inner: T = sr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for (o, (&p, &q)) in d.row_mut(i).iter_mut().zip(sr.iter().zip(gr)) {
                            *o = p * (q - inner);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::SumRows(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    accumulate(&mut grads, *a, Matrix::from_fn(r, c, |i, _| g[(i, 0)]));
                }
                Op::SumCols(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    accumulate(&mut grads, *a, Matrix::from_fn(r, c, |_, j| g[(0, j)]));
                }
                Op::ClampMin(a, floor) => {
                    let x = &nodes[*a].value;
                    let d = Matrix::from_fn(x.rows(), x.cols(), |i, j| {
                        if x[(i, j)] > *floor {
                            g[(i, j)]
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut grads, *a, d);
                }
                Op::PermuteCols(a, perm) => {
                    let (r, c) = nodes[*a].value.shape();
                    let mut d = Matrix::zeros(r, c);
                    for i in 0..r {
                        for (j, &p) in perm.iter().enumerate() {
                            d[(i, p)] += g[(i, j)];
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

#[inline]
fn sign<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Matrix<T>>], id: usize, g: Matrix<T>) {
    match &mut grads[id] {
        Some(acc) => acc.axpy(T::one(), &g).expect("gradient shapes agree"),
        slot @ None => *slot = Some(g),
    }
}

/// Gradients of the loss with respect to every leaf reached by the backward sweep.
#[derive(Debug)]
pub struct Gradients<T: Scalar = f64> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Matrix<T>> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    /// Gradient of `v`, or zeros of its shape if the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Matrix<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(v.rows, v.cols))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn sum_of_squares() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[1.0, 2.0, 3.0]]));
        let sq = t.square(x).unwrap();
        let l = t.sum(sq).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x).as_slice(), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn leaky_relu_slopes() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[-1.0, 1.0]]));
        let y = t.leaky_relu(x, 0.2).unwrap();
        let l = t.sum(y).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x).as_slice(), &[0.2, 1.0]);
    }

    #[test]
    fn sum_of_weights_has_unit_gradient() {
        let mut t = Tape::new();
        let w = t.param(m(&[&[1.0, -2.0], &[0.5, 4.0]]));
        let l = t.sum(w).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(w), Matrix::ones(2, 2));
    }

    #[test]
    fn linear_map_gradient() {
        let a_val = m(&[&[1.0, 2.0, 0.5], &[-1.0, 0.0, 3.0]]);
        let b_val = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let mut t = Tape::new();
        let a = t.param(a_val.clone());
        let b = t.param(b_val.clone());
        let ab = t.matmul(a, b).unwrap();
        let l = t.sum(ab).unwrap();
        let g = t.backward(l).unwrap();
        let expected_a = Matrix::ones(2, 2).matmul(&b_val.transpose()).unwrap();
        let expected_b = a_val.transpose().matmul(&Matrix::ones(2, 2)).unwrap();
        assert_eq!(g.wrt(a), expected_a);
        assert_eq!(g.wrt(b), expected_b);
    }

    #[test]
    fn reuse_accumulates() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[1.0, -3.0]]));
        let s1 = t.sum(x).unwrap();
        let s2 = t.sum(x).unwrap();
        let l = t.add(s1, s2).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x).as_slice(), &[2.0, 2.0]);
    }

    #[test]
    fn second_backward_is_an_error() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[1.0]]));
        let l = t.sum(x).unwrap();
        t.backward(l).unwrap();
        assert!(matches!(t.backward(l), Err(Error::TapeConsumed)));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[1.0, 2.0]]));
        assert!(matches!(t.backward(x), Err(Error::NotScalar { rows: 1, cols: 2 })));
    }

    #[test]
    fn shape_and_domain_errors() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[1.0, 2.0]]));
        let y = t.param(m(&[&[1.0], &[2.0]]));
        assert!(matches!(t.add(x, y), Err(Error::ShapeMismatch { .. })));
        let z = t.param(m(&[&[0.0, 2.0]]));
        assert!(matches!(t.log(z), Err(Error::Domain { .. })));
    }

    #[test]
    fn abs_has_zero_subgradient_at_kink() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[-2.0, 0.0, 3.0]]));
        let a = t.abs(x).unwrap();
        let l = t.sum(a).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x).as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn clamp_blocks_gradient_below_floor() {
        let mut t = Tape::new();
        let x = t.param(m(&[&[1e-20, 0.5]]));
        let c = t.clamp_min(x, 1e-12).unwrap();
        let lg = t.log(c).unwrap();
        let l = t.sum(lg).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x).as_slice(), &[0.0, 2.0]);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(m(&[&[1.0, 2.0]]));
        let x = t.param(m(&[&[3.0, 4.0]]));
        let p = t.mul_elem(c, x).unwrap();
        let l = t.sum(p).unwrap();
        let g = t.backward(l).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.wrt(x).as_slice(), &[1.0, 2.0]);
    }
}
