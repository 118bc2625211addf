//! Feed-forward networks, reverse-mode differentiation and Adam training.

mod adam;
pub mod checkpoint;
mod mlp;
mod standardize;
mod tape;

pub use adam::{adam_step, fit, AdamConfig, AdamState, TrainConfig};
pub use mlp::{gradient, layer_spec, MlpNet, Parameterized};
pub use standardize::{Standardizer, STD_FLOOR};
pub use tape::{Gradients, Tape, Var};
