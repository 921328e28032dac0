//! Device dynamics: grid-forming PV inverter, classical generator with a
//! droop governor, and the shared RK4 integrator.

mod generator;
mod integrator;
mod inverter;

pub use generator::{generator_derivatives, generator_derivatives_with, GenInputs, GenState};
pub use integrator::{rk4_step, Rk4};
pub use inverter::{
    inverter_derivatives, inverter_init, inverter_jacobian, GridInterface, InverterEquilibrium,
    InverterParams, InverterState, STATE_LEN as INVERTER_STATE_LEN,
};

/// Nominal angular frequency of the 60 Hz system, rad/s.
pub const OMEGA_0: f64 = 2.0 * std::f64::consts::PI * 60.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynError {
    #[error("no equilibrium: {0}")]
    NoEquilibrium(String),
    #[error("integration produced a non-finite value at state index {index}")]
    NonFinite { index: usize },
}
