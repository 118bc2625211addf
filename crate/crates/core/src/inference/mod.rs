//! Posterior evaluation: tensor grids, DREAM sampling with Gelman–Rubin
//! diagnostics, and the comparison metrics.

mod dream;
mod grid;
mod metrics;

pub use crate::stats::pearson;
pub use dream::{dream_sample, gelman_rubin, psrf, sample_to_convergence, ChainEnsemble, ConvergenceRun, DreamConfig};
pub use grid::{grid_posterior, hellinger, linspace, tabulate, PosteriorGrid};
pub use metrics::{
    diagonal, knn_kl_divergence, pearson_columns, rescaled_trace, sample_covariance, sample_mean, trace,
};
