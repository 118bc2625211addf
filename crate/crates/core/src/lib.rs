//! Multifidelity surrogate likelihoods for Bayesian inversion of expensive
//! forward models.
//!
//! The crate is organised bottom-up:
//!
//! - [`nn`]: dense networks, a reverse-mode tape and Adam.
//! - [`surrogates`]: dense and neural-active-manifold surrogates of a model
//!   or of its discrepancy with a cheaper model, plus the optimal scaling
//!   used by the modeling-error likelihood.
//! - [`density`]: normalizing flows for the inflated-noise density.
//! - [`models`]: benchmark function pairs and Windkessel circuits.
//! - [`bayes`]: priors, the six likelihood constructions and posteriors.
//! - [`inference`]: grid posteriors, DREAM sampling and comparison metrics.
//! - [`pipeline`]: end-to-end assembly of the likelihood for each method.
//!
//! Numerical kernels are generic over [`Scalar`]; the aliases below fix
//! them to `f64`, which is what the inference layer uses.

pub mod bayes;
pub mod density;
pub mod design;
pub mod error;
pub mod inference;
pub mod matrix;
pub mod models;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod stats;
pub mod surrogates;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

pub type Mat = matrix::Matrix<f64>;
pub type Mlp = nn::MlpNet<f64>;
pub type Flow = density::FlowModel<f64>;
pub type Dense = surrogates::DenseSurrogate<f64>;
pub type NeurAm = surrogates::NeurAmModel<f64>;
pub type Data = surrogates::Dataset<f64>;
