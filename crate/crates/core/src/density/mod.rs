//! Normalizing flows for the inflated-noise density: RealNVP couplings in
//! two or more dimensions, monotone scalar maps in one.

mod coupling;
mod flow;
mod monotone;
mod noise;

pub use coupling::{alternating_mask, Coupling};
pub use flow::{train_flow, FlowArch, FlowLayers, FlowModel, FlowReport};
pub use monotone::MonotoneLayer;
pub use noise::NoiseSampleSet;
