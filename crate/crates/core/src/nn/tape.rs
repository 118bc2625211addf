//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Values are recorded in evaluation order, so the node list is already a
//! topological order of the graph; the backward pass walks it once in reverse.
//! Shape mismatches inside the graph are programmer errors and panic; the
//! public network API validates shapes before anything is recorded.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Handle to a recorded value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug)]
enum Op<T> {
    Param,
    Const,
    MatMul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    AddScalar(Var, T),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    Transpose(Var),
    Floor,
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Param => "param",
            Op::Const => "const",
            Op::MatMul(..) => "matmul",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::Tanh(_) => "tanh",
            Op::Exp(_) => "exp",
            Op::Log(_) => "log",
            Op::Square(_) => "square",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::SumCols(_) => "sum_cols",
            Op::Transpose(_) => "transpose",
            Op::Floor => "floor",
        }
    }
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Recording of one forward evaluation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> T {
        let m = self.value(v);
        assert_eq!(m.shape(), (1, 1), "scalar() on a non-scalar node");
        m.as_slice()[0]
    }

    fn push(&mut self, value: Matrix<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Differentiable leaf.
    pub fn param(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Param, true)
    }

    pub fn constant(&mut self, value: Matrix<T>) -> Var {
        self.push(value, Op::Const, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.cols(), vb.rows(), "matmul shape mismatch");
        let out = va.matmul(vb);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, Op::MatMul(a, b), ng)
    }

    /// `a + row`, broadcasting a `1 × c` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!(vr.rows(), 1, "add_row expects a single row");
        assert_eq!(va.cols(), vr.cols(), "add_row width mismatch");
        let mut out = va.clone();
        let r = vr.as_slice();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(r) {
                *o += b;
            }
        }
        let ng = self.ng(a) || self.ng(row);
        self.push(out, Op::AddRow(a, row), ng)
    }

    /// `a ⊙ row`, broadcasting a `1 × c` row over every row of `a`.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        assert_eq!(vr.rows(), 1, "mul_row expects a single row");
        assert_eq!(va.cols(), vr.cols(), "mul_row width mismatch");
        let mut out = va.clone();
        let r = vr.as_slice();
        for i in 0..out.rows() {
            for (o, &b) in out.row_mut(i).iter_mut().zip(r) {
                *o *= b;
            }
        }
        let ng = self.ng(a) || self.ng(row);
        self.push(out, Op::MulRow(a, row), ng)
    }

    fn binary(&mut self, a: Var, b: Var, op: Op<T>, f: impl Fn(T, T) -> T) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "{} shape mismatch", op.name());
        let out = va.zip_map(vb, f);
        let ng = self.ng(a) || self.ng(b);
        self.push(out, op, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    fn unary(&mut self, a: Var, op: Op<T>, f: impl Fn(T) -> T) -> Var {
        let out = self.value(a).map(f);
        let ng = self.ng(a);
        self.push(out, op, ng)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, Op::AddScalar(a, c), |x| x + c)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), T::tanh)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), T::exp)
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), T::ln)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// Piecewise-constant rounding; usable in evaluation graphs but has no
    /// derivative, so differentiating through it is rejected.
    pub fn floor(&mut self, a: Var) -> Var {
        self.unary(a, Op::Floor, T::floor)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let ng = self.ng(a);
        self.push(Matrix::scalar(s), Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.sum() / T::of(v.len() as f64);
        let ng = self.ng(a);
        self.push(Matrix::scalar(s), Op::Mean(a), ng)
    }

    /// Row-wise sum: `n × c → n × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let data: Vec<T> = v.iter_rows().map(|r| r.iter().copied().sum()).collect();
        let out = Matrix::from_vec(v.rows(), 1, data).expect("row count");
        let ng = self.ng(a);
        self.push(out, Op::SumCols(a), ng)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let ng = self.ng(a);
        self.push(out, Op::Transpose(a), ng)
    }

    /// Reverse sweep from a `1 × 1` node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::shape(
                "Tape::backward",
                "1x1 loss",
                format!("{:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(T::one()));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match node.op {
                Op::Param | Op::Const => {
                    grads[idx] = Some(g);
                }
                Op::MatMul(a, b) => {
                    if self.ng(a) {
                        let ga = g.matmul_t(self.value(b));
                        accumulate(&mut grads, a, ga);
                    }
                    if self.ng(b) {
                        let gb = self.value(a).t_matmul(&g);
                        accumulate(&mut grads, b, gb);
                    }
                }
                Op::AddRow(a, row) => {
                    if self.ng(row) {
                        accumulate(&mut grads, row, g.sum_rows());
                    }
                    if self.ng(a) {
                        accumulate(&mut grads, a, g);
                    }
                }
                Op::MulRow(a, row) => {
                    let r = self.value(row);
                    if self.ng(row) {
                        let va = self.value(a);
                        let mut gr = Matrix::zeros(1, r.cols());
                        for i in 0..g.rows() {
                            for ((o, &gv), &av) in
                                gr.as_mut_slice().iter_mut().zip(g.row(i)).zip(va.row(i))
                            {
                                *o += gv * av;
                            }
                        }
                        accumulate(&mut grads, row, gr);
                    }
                    if self.ng(a) {
                        let mut ga = g;
                        let rs = r.as_slice();
                        for i in 0..ga.rows() {
                            for (o, &b) in ga.row_mut(i).iter_mut().zip(rs) {
                                *o *= b;
                            }
                        }
                        accumulate(&mut grads, a, ga);
                    }
                }
                Op::Add(a, b) => {
                    if self.ng(a) && self.ng(b) {
                        accumulate(&mut grads, a, g.clone());
                        accumulate(&mut grads, b, g);
                    } else if self.ng(a) {
                        accumulate(&mut grads, a, g);
                    } else {
                        accumulate(&mut grads, b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.ng(b) {
                        accumulate(&mut grads, b, g.map(|v| -v));
                    }
                    if self.ng(a) {
                        accumulate(&mut grads, a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.ng(a) {
                        accumulate(&mut grads, a, g.zip_map(self.value(b), |x, y| x * y));
                    }
                    if self.ng(b) {
                        accumulate(&mut grads, b, g.zip_map(self.value(a), |x, y| x * y));
                    }
                }
                Op::Scale(a, c) => accumulate(&mut grads, a, g.map(|v| v * c)),
                Op::AddScalar(a, _) => accumulate(&mut grads, a, g),
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |gv, y| gv * (T::one() - y * y));
                    accumulate(&mut grads, a, ga);
                }
                Op::Exp(a) => {
                    let ga = g.zip_map(&node.value, |gv, y| gv * y);
                    accumulate(&mut grads, a, ga);
                }
                Op::Log(a) => {
                    let ga = g.zip_map(self.value(a), |gv, x| gv / x);
                    accumulate(&mut grads, a, ga);
                }
                Op::Square(a) => {
                    let two = T::of(2.0);
                    let ga = g.zip_map(self.value(a), |gv, x| two * gv * x);
                    accumulate(&mut grads, a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = self.value(a).shape();
                    accumulate(&mut grads, a, Matrix::filled(r, c, g.as_slice()[0]));
                }
                Op::Mean(a) => {
                    let (r, c) = self.value(a).shape();
                    let v = g.as_slice()[0] / T::of((r * c) as f64);
                    accumulate(&mut grads, a, Matrix::filled(r, c, v));
                }
                Op::SumCols(a) => {
                    let (r, c) = self.value(a).shape();
                    let mut ga = Matrix::zeros(r, c);
                    for i in 0..r {
                        let gi = g.as_slice()[i];
                        ga.row_mut(i).iter_mut().for_each(|o| *o = gi);
                    }
                    accumulate(&mut grads, a, ga);
                }
                Op::Transpose(a) => accumulate(&mut grads, a, g.transpose()),
                Op::Floor => return Err(Error::Capability(node.op.name())),
            }
        }
        Ok(Gradients { grads })
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Adjoints of the differentiable leaves after a backward sweep.
pub struct Gradients<T> {
    grads: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to a leaf; zero when the loss does not depend on it.
    pub fn wrt(&self, v: Var, shape: (usize, usize)) -> Matrix<T> {
        self.grads
            .get(v.0)
            .and_then(Option::as_ref)
            .cloned()
            .unwrap_or_else(|| Matrix::zeros(shape.0, shape.1))
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_has_analytic_gradient() {
        let mut tape = Tape::<f64>::new();
        let w = tape.param(Matrix::scalar(1.0));
        let shifted = tape.add_scalar(w, -3.0);
        let sq = tape.square(shifted);
        let loss = tape.sum(sq);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w, (1, 1)).as_slice(), &[-4.0]);
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut tape = Tape::<f64>::new();
        let w = tape.param(Matrix::from_vec(1, 2, vec![0.3, -0.7]).unwrap());
        let c = tape.constant(Matrix::scalar(5.0));
        let loss = tape.sum(c);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w, (1, 2)).as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn floor_in_differentiable_path_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let w = tape.param(Matrix::scalar(1.5));
        let f = tape.floor(w);
        let loss = tape.sum(f);
        assert!(matches!(
            tape.backward(loss),
            Err(Error::Capability("floor"))
        ));
    }

    #[test]
    fn floor_on_constants_is_allowed() {
        let mut tape = Tape::<f64>::new();
        let w = tape.param(Matrix::scalar(2.0));
        let c = tape.constant(Matrix::scalar(1.7));
        let fc = tape.floor(c);
        let prod = tape.mul(w, fc);
        let loss = tape.sum(prod);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w, (1, 1)).as_slice(), &[1.0]);
    }

    #[test]
    fn non_scalar_loss_is_an_error() {
        let mut tape = Tape::<f64>::new();
        let w = tape.param(Matrix::zeros(2, 2));
        assert!(tape.backward(w).is_err());
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // d/dw of (w*w + w) at w = 2 is 2w + 1 = 5
        let mut tape = Tape::<f64>::new();
        let w = tape.param(Matrix::scalar(2.0));
        let ww = tape.mul(w, w);
        let s = tape.add(ww, w);
        let loss = tape.sum(s);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.wrt(w, (1, 1)).as_slice(), &[5.0]);
    }
}
