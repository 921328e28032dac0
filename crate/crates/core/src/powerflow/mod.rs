//! Steady-state network solvers: polar Newton-Raphson for the transmission
//! grid and a three-phase backward/forward sweep for radial feeders.

mod feeder;
mod newton;

pub use feeder::{
    balanced, feeder_as_load, phase_shift, positive_sequence, solve_feeder_dispatch, solve_feeder_pf,
    FeederDispatch, FeederSolution, Sweep,
};
pub use newton::{branch_flows, solve_problem, solve_transmission_pf, BusType, PfProblem, PfSolution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PfError {
    #[error("no convergence after {iterations} iterations (max mismatch {max_mismatch:.3e})")]
    NoConvergence { max_mismatch: f64, iterations: usize },
    #[error("voltage collapse at feeder node {node} (|V| = {vm:.4})")]
    VoltageCollapse { node: String, vm: f64 },
    #[error("invalid feeder: {0}")]
    InvalidFeeder(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl PfOptions {
    pub fn feeder() -> Self {
        PfOptions {
            tol: 1e-8,
            max_iter: 50,
        }
    }
}

impl Default for PfOptions {
    fn default() -> Self {
        PfOptions {
            tol: 1e-8,
            max_iter: 20,
        }
    }
}
