//! Priors, the six likelihood constructions and unnormalized posteriors.

mod likelihood;
mod model;
mod posterior;
mod prior;

pub use likelihood::{Handles, LikelihoodSpec, Method, NoiseSpec};
pub(crate) use model::check_input;
pub use model::{fn_model, CountingModel, FnModel, Model, ModelRef, SumModel};
pub use posterior::PosteriorSpec;
pub use prior::{PriorKind, PriorSpec};
