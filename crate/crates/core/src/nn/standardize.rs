use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Smallest standard deviation used when scaling a column.
pub const STD_FLOOR: f64 = 1e-12;

/// Per-column affine normalisation to zero mean and unit variance.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            std: vec![T::one(); dim],
        }
    }

    /// Population statistics of each column, with the deviation floored at
    /// [`STD_FLOOR`].
    pub fn fit(data: &Matrix<T>) -> Self {
        let n = T::of(data.rows().max(1) as f64);
        let mean: Vec<T> = data.sum_rows().as_slice().iter().map(|&s| s / n).collect();
        let mut var = vec![T::zero(); data.cols()];
        for row in data.iter_rows() {
            for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let floor = T::of(STD_FLOOR);
        let std = var.into_iter().map(|v| (v / n).sqrt().max(floor)).collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[T]) -> Vec<T> {
        z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| v * s + m)
            .collect()
    }

    pub fn apply_matrix(&self, x: &Matrix<T>) -> Matrix<T> {
        let mut out = x.clone();
        for i in 0..out.rows() {
            for ((v, &m), &s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub fn invert_matrix(&self, z: &Matrix<T>) -> Matrix<T> {
        let mut out = z.clone();
        for i in 0..out.rows() {
            for ((v, &m), &s) in out.row_mut(i).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        out
    }

    /// `Σ log σ_j`, the log-Jacobian of the inverse map.
    pub fn log_scale(&self) -> T {
        self.std.iter().map(|s| s.ln()).sum()
    }
}
