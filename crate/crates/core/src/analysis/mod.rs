//! Validation analytics and task metrics: forecasting errors, event
//! classification scores, spectral and modal analysis, the PMU-signature
//! localization baseline, and fidelity measures for generated series.

mod classify;
mod fidelity;
mod forecast;
mod localize;
mod modes;
mod spectral;

pub use classify::{balanced_accuracy, macro_mae};
pub use fidelity::{correlation_fidelity, correlation_fidelity_lags, pca_project, Fidelity, PcaProjection};
pub use forecast::{mean_interval_score, naive_forecast, point_errors, ForecastEval, PointErrors};
pub use localize::{channel_buses, pmu_signature_localize};
pub use modes::{estimate_modes, ModeEstimate};
pub use spectral::{power_spectral_density, welch, Psd};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("zero actual at index {0}; MAPE undefined")]
    ZeroActual(usize),
    #[error("interval bounds crossed at index {0}")]
    InvalidInterval(usize),
    #[error("series too short: need {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("rank deficient: {0}")]
    RankDeficient(String),
    #[error("degenerate covariance")]
    DegenerateCovariance,
    #[error("window {start}..{end} outside {len} rows")]
    Window { start: usize, end: usize, len: usize },
}

fn same_len(a: usize, b: usize) -> Result<(), AnalysisError> {
    if a != b {
        Err(AnalysisError::LengthMismatch(a, b))
    } else if a == 0 {
        Err(AnalysisError::Empty)
    } else {
        Ok(())
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}
