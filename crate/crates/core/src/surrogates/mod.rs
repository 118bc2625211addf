//! Dense and neural-active-manifold surrogates, and the optimal scaling of a
//! surrogate against the high-fidelity model.

mod alpha;
mod dataset;
mod dense;
pub mod hyper;
mod neuram;

pub use alpha::{evaluate_rows, fit_alpha_opt, inflated_variance, ScaledSurrogate};
pub use dataset::{Dataset, SamplingScheme, Split, TRAIN_FRACTION};
pub use dense::{train_dense, DenseArch, DenseSurrogate, FitReport, Target};
pub use neuram::{train_neuram, LossTerms, NeurAmArch, NeurAmModel, NeurAmReport};
