use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{Parameterized, Tape, Var};
use crate::scalar::Scalar;

/// Strictly increasing scalar map
/// `u = a·x + b + Σ_k c_k tanh(w_k x + d_k)` with `a, c_k, w_k > 0`
/// (stored as logarithms).
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneLayer<T> {
    log_a: Matrix<T>,
    shift: Matrix<T>,
    log_c: Matrix<T>,
    log_w: Matrix<T>,
    offset: Matrix<T>,
}

impl<T: Scalar> MonotoneLayer<T> {
    /// Near-identity start: unit slope, small bumps with staggered centres.
    pub fn new(units: usize) -> Result<Self> {
        if units == 0 {
            return Err(Error::Config(
                "a monotone layer needs at least one unit".into(),
            ));
        }
        let offsets = (0..units)
            .map(|k| {
                if units == 1 {
                    T::zero()
                } else {
                    T::of(-1.5 + 3.0 * k as f64 / (units - 1) as f64)
                }
            })
            .collect::<Vec<_>>();
        Ok(Self {
            log_a: Matrix::scalar(T::zero()),
            shift: Matrix::scalar(T::zero()),
            log_c: Matrix::filled(units, 1, T::of(0.1f64.ln())),
            log_w: Matrix::filled(1, units, T::zero()),
            offset: Matrix::row_vector(&offsets),
        })
    }

    pub fn from_parts(
        log_a: T,
        shift: T,
        log_c: Vec<T>,
        log_w: Vec<T>,
        offset: Vec<T>,
    ) -> Result<Self> {
        let k = log_c.len();
        if k == 0 || log_w.len() != k || offset.len() != k {
            return Err(Error::shape("MonotoneLayer::from_parts", k, log_w.len()));
        }
        Ok(Self {
            log_a: Matrix::scalar(log_a),
            shift: Matrix::scalar(shift),
            log_c: Matrix::column_vector(&log_c),
            log_w: Matrix::row_vector(&log_w),
            offset: Matrix::row_vector(&offset),
        })
    }

    pub fn units(&self) -> usize {
        self.log_c.rows()
    }

    pub(crate) fn raw(&self) -> [&Matrix<T>; 5] {
        [
            &self.log_a,
            &self.shift,
            &self.log_c,
            &self.log_w,
            &self.offset,
        ]
    }

    /// Returns `(u, log du/dx)`.
    pub fn forward(&self, x: T) -> (T, T) {
        let a = self.log_a.as_slice()[0].exp();
        let mut u = a * x + self.shift.as_slice()[0];
        let mut du = a;
        for k in 0..self.units() {
            let c = self.log_c.as_slice()[k].exp();
            let w = self.log_w.as_slice()[k].exp();
            let th = (w * x + self.offset.as_slice()[k]).tanh();
            u += c * th;
            du += c * w * (T::one() - th * th);
        }
        (u, du.ln())
    }

    /// Solves `forward(x) = u` by Newton steps safeguarded with bisection.
    pub fn inverse(&self, u: T) -> T {
        let a = self.log_a.as_slice()[0].exp();
        let b = self.shift.as_slice()[0];
        let total_c: T = self.log_c.as_slice().iter().map(|v| v.exp()).sum();
        let mut lo = (u - b - total_c) / a;
        let mut hi = (u - b + total_c) / a;
        let mut x = (u - b) / a;
        let tol = T::of(4.0) * T::epsilon();
        for _ in 0..200 {
            let (fx, log_d) = self.forward(x);
            let r = fx - u;
            if r == T::zero() {
                return x;
            }
            if r > T::zero() {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - r / log_d.exp();
            let next = if newton > lo && newton < hi {
                newton
            } else {
                T::of(0.5) * (lo + hi)
            };
            if (next - x).abs() <= tol * (T::one() + x.abs()) {
                return next;
            }
            x = next;
        }
        x
    }

    /// Records the layer on a batch column; returns `(u, log du/dx)`, both
    /// `n × 1`.
    pub fn tape_forward(&self, tape: &mut Tape<T>, params: &[Var], x: Var) -> (Var, Var) {
        let [log_a, shift, log_c, log_w, offset] =
            [params[0], params[1], params[2], params[3], params[4]];
        let a = tape.exp(log_a);
        let c = tape.exp(log_c);
        let w = tape.exp(log_w);
        let ax = tape.mul_row(x, a);
        let lin = tape.add_row(ax, shift);
        let pre = tape.matmul(x, w);
        let pre = tape.add_row(pre, offset);
        let th = tape.tanh(pre);
        let bumps = tape.matmul(th, c);
        let u = tape.add(lin, bumps);

        let th2 = tape.square(th);
        let neg = tape.scale(th2, -T::one());
        let sech2 = tape.add_scalar(neg, T::one());
        let wt = tape.transpose(w);
        let cw = tape.mul(c, wt);
        let slope_bumps = tape.matmul(sech2, cw);
        let ones = tape.constant(Matrix::filled(tape.value(x).rows(), 1, T::one()));
        let slope_lin = tape.mul_row(ones, a);
        let slope = tape.add(slope_lin, slope_bumps);
        let log_slope = tape.log(slope);
        (u, log_slope)
    }
}

impl<T: Scalar> Parameterized<T> for MonotoneLayer<T> {
    fn parameters(&self) -> Vec<&Matrix<T>> {
        self.raw().to_vec()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Matrix<T>> {
        vec![
            &mut self.log_a,
            &mut self.shift,
            &mut self.log_c,
            &mut self.log_w,
            &mut self.offset,
        ]
    }
}
