use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::{ModelRef, SumModel};
use crate::density::FlowModel;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::surrogates::ScaledSurrogate;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// The six likelihood constructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Gaussian around `Q_HF`.
    A,
    /// Gaussian around a dense surrogate of `Q_HF`.
    B,
    /// Gaussian around `Q_LF` plus a dense discrepancy surrogate.
    C,
    /// Gaussian around a NeurAM surrogate of `Q_HF`.
    D,
    /// Gaussian around `Q_LF` plus a NeurAM discrepancy surrogate.
    E,
    /// Learned inflated-noise density around `α·(Q_LF + Δ̃)`.
    F,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::A,
        Method::B,
        Method::C,
        Method::D,
        Method::E,
        Method::F,
    ];

    pub fn uses_lf(self) -> bool {
        matches!(self, Method::C | Method::E | Method::F)
    }

    pub fn uses_neuram(self) -> bool {
        matches!(self, Method::D | Method::E | Method::F)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Method::A),
            "B" => Ok(Method::B),
            "C" => Ok(Method::C),
            "D" => Ok(Method::D),
            "E" => Ok(Method::E),
            "F" => Ok(Method::F),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected A–F)"
            ))),
        }
    }
}

/// Diagonal Gaussian measurement noise and the observations it corrupts.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    /// Diagonal of the noise covariance (variances).
    pub variances: Vec<f64>,
    /// `K × m` observations.
    pub observations: Matrix<f64>,
}

impl NoiseSpec {
    pub fn new(variances: Vec<f64>, observations: Matrix<f64>) -> Result<Self> {
        if variances.is_empty() || variances.len() != observations.cols() {
            return Err(Error::shape(
                "NoiseSpec::new",
                variances.len(),
                observations.cols(),
            ));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config(
                "noise variances must be strictly positive".into(),
            ));
        }
        if observations.rows() == 0 {
            return Err(Error::Config("at least one observation is required".into()));
        }
        Ok(Self {
            variances,
            observations,
        })
    }

    /// One scalar observation with standard deviation `sigma`.
    pub fn scalar(y: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![sigma * sigma], Matrix::scalar(y))
    }

    pub fn output_dim(&self) -> usize {
        self.variances.len()
    }

    /// `Σ_k log N(y_k; mean, diag(variances))`.
    pub fn gaussian_log_likelihood(&self, mean: &[f64]) -> f64 {
        let norm: f64 = self.variances.iter().map(|v| 0.5 * (LN_2PI + v.ln())).sum();
        let mut total = 0.0;
        for y in self.observations.iter_rows() {
            let mut q = 0.0;
            for ((yv, mv), v) in y.iter().zip(mean).zip(&self.variances) {
                q += (yv - mv) * (yv - mv) / v;
            }
            total -= 0.5 * q + norm;
        }
        total
    }
}

/// Model handles a likelihood may need; which ones are required depends on
/// the method.
#[derive(Clone, Default)]
pub struct Handles {
    pub hf: Option<ModelRef>,
    pub lf: Option<ModelRef>,
    /// Direct surrogate (B, D) or discrepancy surrogate (C, E, F).
    pub surrogate: Option<ModelRef>,
    pub flow: Option<Arc<FlowModel<f64>>>,
    pub alpha: Option<Vec<f64>>,
}

#[derive(Clone)]
pub struct LikelihoodSpec {
    method: Method,
    mean: ModelRef,
    flow: Option<Arc<FlowModel<f64>>>,
    noise: NoiseSpec,
}

fn need<T: Clone>(h: &Option<T>, what: &str, method: Method) -> Result<T> {
    h.clone()
        .ok_or_else(|| Error::Config(format!("method {method} requires a {what}")))
}

impl LikelihoodSpec {
    pub fn new(method: Method, handles: Handles, noise: NoiseSpec) -> Result<Self> {
        let mean: ModelRef = match method {
            Method::A => need(&handles.hf, "high-fidelity model", method)?,
            Method::B | Method::D => need(&handles.surrogate, "surrogate", method)?,
            Method::C | Method::E | Method::F => {
                let lf = need(&handles.lf, "low-fidelity model", method)?;
                let delta = need(&handles.surrogate, "discrepancy surrogate", method)?;
                Arc::new(SumModel::new(lf, delta)?)
            }
        };
        let (mean, flow): (ModelRef, _) = if method == Method::F {
            let flow = need(&handles.flow, "flow", method)?;
            let alpha = need(&handles.alpha, "scaling α", method)?;
            if flow.dim() != mean.output_dim() {
                return Err(Error::shape(
                    "LikelihoodSpec flow",
                    mean.output_dim(),
                    flow.dim(),
                ));
            }
            (Arc::new(ScaledSurrogate::new(mean, alpha)?), Some(flow))
        } else {
            (mean, None)
        };
        if mean.output_dim() != noise.output_dim() {
            return Err(Error::shape(
                "LikelihoodSpec outputs",
                noise.output_dim(),
                mean.output_dim(),
            ));
        }
        Ok(Self {
            method,
            mean,
            flow,
            noise,
        })
    }

    /// Method F with an already-scaled mean model `α·q†`.
    pub fn with_flow(
        scaled_mean: ModelRef,
        flow: Arc<FlowModel<f64>>,
        noise: NoiseSpec,
    ) -> Result<Self> {
        if flow.dim() != scaled_mean.output_dim() || noise.output_dim() != flow.dim() {
            return Err(Error::shape(
                "LikelihoodSpec::with_flow",
                scaled_mean.output_dim(),
                flow.dim(),
            ));
        }
        Ok(Self {
            method: Method::F,
            mean: scaled_mean,
            flow: Some(flow),
            noise,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    pub fn input_dim(&self) -> usize {
        self.mean.input_dim()
    }

    /// The method's mean map (`α·q†` for method F).
    pub fn mean_model(&self) -> &ModelRef {
        &self.mean
    }

    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        let mu = self.mean.eval(x)?;
        match &self.flow {
            None => Ok(self.noise.gaussian_log_likelihood(&mu)),
            Some(flow) => {
                let mut total = 0.0;
                let mut r = vec![0.0; mu.len()];
                for y in self.noise.observations.iter_rows() {
                    for ((rv, yv), mv) in r.iter_mut().zip(y).zip(&mu) {
                        *rv = yv - mv;
                    }
                    total += flow.log_density(&r)?;
                }
                Ok(total)
            }
        }
    }
}
