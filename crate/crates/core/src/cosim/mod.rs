//! Transmission+distribution co-simulation: the iterative steady-state
//! coupling with its minute-level series driver, and the transient event
//! simulator.

mod inputs;
mod scenario;
mod steady;
mod transient;

pub use inputs::{thermal_dispatch, Injections, ProfileBindings};
pub use scenario::{sample_scenario, EventKind, EventParams, KindWeights, ScenarioSpec, Target};
pub use steady::{
    iterate_td_powerflow, run_steady_series, SteadyRunConfig, SteadySeries, TdOptions, TdSolution,
};
pub use transient::{
    run_batch, run_transient_scenario, BatchOptions, BatchOutcome, TransientOptions, TransientResult,
};

use chrono::NaiveDateTime;

use crate::powerflow::PfError;
use crate::profiles::ProfileError;
use crate::records::RecordsError;

#[derive(Debug, thiserror::Error)]
pub enum CosimError {
    #[error("T+D coupling did not converge in {} outer iterations (last change {:.3e})", history.len(), history.last().copied().unwrap_or(f64::NAN))]
    OuterNoConvergence { history: Vec<f64> },
    #[error("transmission power flow: {0}")]
    Transmission(PfError),
    #[error("feeder at bus {bus}: {source}")]
    Feeder { bus: u32, source: PfError },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("at {time}: {source}")]
    AtTime {
        time: NaiveDateTime,
        source: Box<CosimError>,
    },
    #[error("initialization failed: {0}")]
    InitFailure(String),
    #[error("numerical blow-up at t = {t:.4} s: {what}")]
    NumericalBlowup { t: f64, what: String },
    #[error("no eligible target for {0}")]
    NoEligibleTarget(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Records(#[from] RecordsError),
}
