use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use gridtd_core::analysis::{
    balanced_accuracy, correlation_fidelity_lags, estimate_modes, macro_mae, mean_interval_score,
    naive_forecast, point_errors, power_spectral_density, ForecastEval,
};

use crate::table::{read_string_columns, Table};

#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// RMSE/MAE/MAPE and, with interval columns, MIS. Columns y, y_hat,
    /// optionally y_l and y_u; or a single column with --naive.
    Forecast(ForecastArgs),
    /// Balanced accuracy and macro MAE of y_true against y_pred.
    Events(InputArgs),
    /// Correlation differences between a real and a synthetic frame.
    Fidelity(FidelityArgs),
    /// Strongest spectral peaks per channel.
    Psd(PsdArgs),
    /// Matrix-pencil modes per channel of a ringdown.
    Modes(ModesArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long = "in", required = true)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long = "in", required = true)]
    pub input: PathBuf,
    /// Persistence forecast at this many rows ahead.
    #[arg(long)]
    pub naive: Option<usize>,
    /// Column forecast by --naive.
    #[arg(long, default_value = "load_power")]
    pub column: String,
}

#[derive(Debug, Args)]
pub struct FidelityArgs {
    /// Real frame, then synthetic frame.
    #[arg(long = "in", num_args = 2, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub lags: usize,
}

#[derive(Debug, Args)]
pub struct PsdArgs {
    #[arg(long = "in", required = true)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub peaks: usize,
}

#[derive(Debug, Args)]
pub struct ModesArgs {
    #[arg(long = "in", required = true)]
    pub input: PathBuf,
    /// Start of the analysis window in seconds.
    #[arg(long, default_value_t = 0.0)]
    pub from: f64,
    #[arg(long, default_value_t = 10)]
    pub order: usize,
    /// Restrict to channels whose name starts with this prefix.
    #[arg(long)]
    pub channel: Option<String>,
}

pub fn run(cmd: &MetricsCommand, out: &mut dyn Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    match cmd {
        MetricsCommand::Forecast(a) => {
            let t = Table::read(&a.input)?;
            w.write_record(["metric", "value"])?;
            let (y, y_hat, interval) = match a.naive {
                Some(tau) => {
                    let (f, y) = naive_forecast(t.column(&a.column)?, tau)?;
                    (y, f, None)
                }
                None => {
                    let interval = match (t.column("y_l"), t.column("y_u")) {
                        (Ok(l), Ok(u)) => Some((l.to_vec(), u.to_vec())),
                        _ => None,
                    };
                    (t.column("y")?.to_vec(), t.column("y_hat")?.to_vec(), interval)
                }
            };
            let e = point_errors(&y, &y_hat)?;
            for (k, v) in [("rmse", e.rmse), ("mae", e.mae), ("mape", e.mape)] {
                w.write_record([k, &v.to_string()])?;
            }
            if let Some((l, u)) = interval {
                let ev = ForecastEval::new(y, y_hat, l, u)?;
                w.write_record(["mis", &mean_interval_score(&ev).to_string()])?;
            }
        }
        MetricsCommand::Events(a) => {
            let cols = read_string_columns(&a.input, &["y_true", "y_pred"])?;
            w.write_record(["metric", "value"])?;
            w.write_record([
                "balanced_accuracy",
                &balanced_accuracy(&cols[0], &cols[1])?.to_string(),
            ])?;
            let ints: Result<Vec<Vec<i64>>, _> = cols
                .iter()
                .map(|c| c.iter().map(|s| s.parse::<i64>()).collect())
                .collect();
            if let Ok(v) = ints {
                w.write_record(["macro_mae", &macro_mae(&v[0], &v[1])?.to_string()])?;
            }
        }
        MetricsCommand::Fidelity(a) => {
            let real = Table::read(&a.input[0])?;
            let syn = Table::read(&a.input[1])?;
            let f = correlation_fidelity_lags(&real.columns, &syn.columns, a.lags)?;
            w.write_record(["metric", "value"])?;
            w.write_record(["autocorr_diff", &f.autocorr_diff.to_string()])?;
            w.write_record(["crosscorr_diff", &f.crosscorr_diff.to_string()])?;
            w.write_record(["skipped", &f.skipped.to_string()])?;
        }
        MetricsCommand::Psd(a) => {
            let t = Table::read(&a.input)?;
            let dt = t.sample_interval()?;
            w.write_record(["channel", "rank", "frequency_hz", "period_hours", "density"])?;
            for (name, col) in t.names.iter().zip(&t.columns) {
                let psd = power_spectral_density(col, dt).with_context(|| format!("channel {name}"))?;
                for (rank, &i) in psd.peaks().iter().take(a.peaks).enumerate() {
                    let f = psd.frequency[i];
                    w.write_record([
                        name.clone(),
                        (rank + 1).to_string(),
                        f.to_string(),
                        (1.0 / f / 3600.0).to_string(),
                        psd.density[i].to_string(),
                    ])?;
                }
            }
        }
        MetricsCommand::Modes(a) => {
            let t = Table::read(&a.input)?;
            let dt = t.sample_interval()?;
            if !(dt > 0.0) {
                bail!("non-increasing time column");
            }
            let start = (a.from / dt).round() as usize;
            w.write_record(["channel", "frequency_hz", "damping", "amplitude", "energy"])?;
            for (name, col) in t.names.iter().zip(&t.columns) {
                if a.channel.as_ref().is_some_and(|p| !name.starts_with(p.as_str())) {
                    continue;
                }
                let window = col.get(start..).unwrap_or(&[]);
                let mean = window.iter().sum::<f64>() / window.len().max(1) as f64;
                let centered: Vec<f64> = window.iter().map(|x| x - mean).collect();
                let Ok(modes) = estimate_modes(&centered, 1.0 / dt, a.order) else {
                    continue;
                };
                for m in modes {
                    w.write_record([
                        name.clone(),
                        m.frequency.to_string(),
                        m.damping.to_string(),
                        m.amplitude.to_string(),
                        m.energy.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
