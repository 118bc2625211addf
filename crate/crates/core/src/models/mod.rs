//! Forward models: analytic benchmark pairs, Windkessel circuits driven by a
//! periodic inflow, and vessel-geometry helpers.

mod benchmarks;
mod geometry;
mod inflow;
mod windkessel;

pub use benchmarks::{
    analytical_hf, analytical_lf, borehole_hf, borehole_lf, borehole_observations, michalewicz, Benchmark,
    Fidelity, NoisyPair,
};
pub use geometry::{mean_cuff_pressure, rigid_rlc, rlc_from_geometry, Rlc, BLOOD_DENSITY, BLOOD_VISCOSITY};
pub use inflow::InflowWaveform;
pub use windkessel::{
    simulate_windkessel, PressureQoI, SimConfig, Simulation, WindkesselKind, WindkesselModel, WindkesselParams,
    MMHG,
};
