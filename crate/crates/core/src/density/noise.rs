use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Residual draws `δ = Q_HF(x) − α·q†(x) + η` used to fit the inflated
/// noise density.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSampleSet<T> {
    pub deltas: Matrix<T>,
    pub alpha: Vec<f64>,
    pub surrogate_id: String,
}

impl<T: Scalar> NoiseSampleSet<T> {
    pub fn new(deltas: Matrix<T>) -> Self {
        let alpha = vec![1.0; deltas.cols()];
        Self {
            deltas,
            alpha,
            surrogate_id: String::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.deltas.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.deltas.cols()
    }
}

impl NoiseSampleSet<f64> {
    /// Builds residuals from already-computed high-fidelity and surrogate
    /// values at the same inputs, adding synthetic Gaussian measurement noise
    /// with the given per-output variances.
    pub fn from_residuals(
        hf: &Matrix<f64>,
        qdagger: &Matrix<f64>,
        alpha: &[f64],
        noise_variance: &[f64],
        seed: u64,
        surrogate_id: &str,
    ) -> Result<Self> {
        let m = hf.cols();
        if qdagger.shape() != hf.shape() || alpha.len() != m || noise_variance.len() != m {
            return Err(Error::shape(
                "NoiseSampleSet::from_residuals",
                format!("{:?} with {m} scalings and variances", hf.shape()),
                format!(
                    "{:?}, {}, {}",
                    qdagger.shape(),
                    alpha.len(),
                    noise_variance.len()
                ),
            ));
        }
        if noise_variance.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Config("noise variances must be nonnegative".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut deltas = Matrix::zeros(hf.rows(), m);
        for i in 0..hf.rows() {
            for j in 0..m {
                let eta: f64 = StandardNormal.sample(&mut rng);
                deltas[(i, j)] =
                    hf[(i, j)] - alpha[j] * qdagger[(i, j)] + noise_variance[j].sqrt() * eta;
            }
        }
        Ok(Self {
            deltas,
            alpha: alpha.to_vec(),
            surrogate_id: surrogate_id.to_string(),
        })
    }
}
