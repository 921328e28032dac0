mod metrics;
mod table;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use gridtd_core::cosim::{iterate_td_powerflow, Injections, KindWeights, TdOptions};
use gridtd_core::grid::load_case;
use gridtd_core::pipeline::{
    run_steady_pipeline, run_transient_pipeline, PipelineError, ProfileSource, SteadyArgs, TransientArgs,
};
use gridtd_core::profiles::{parse_time, synth_zone, write_zone_csv, SyntheticZone};

use metrics::MetricsCommand;

/// Transmission+distribution co-simulation: power flow, minute-level
/// series, transient event batches and metrics.
#[derive(Debug, Parser)]
#[command(name = "gridtd", version)]
struct Cli {
    /// Seed for scenario sampling and synthetic profiles.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory, or the report file for `metrics`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a case file and print a summary.
    Validate { case: PathBuf },
    /// Coupled steady-state power flow at the case-file operating point.
    Pf {
        case: PathBuf,
        /// Multiplier on every load.
        #[arg(long, default_value_t = 1.0)]
        load_scale: f64,
    },
    /// Minute-level steady series over [--from, --to).
    Steady {
        case: PathBuf,
        #[command(flatten)]
        profiles: ProfileArgs,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long, default_value_t = 1)]
        case_index: usize,
        #[arg(long, default_value_t = 1.0)]
        load_multiplier: f64,
    },
    /// Random disturbance batch.
    Transient {
        case: PathBuf,
        #[command(flatten)]
        profiles: ProfileArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// e.g. `bus_fault=0.5,gen_trip=0.5`; uniform when omitted.
        #[arg(long)]
        kind_weights: Option<String>,
        /// Scenario length in seconds.
        #[arg(long, default_value_t = 4.0)]
        duration: f64,
        /// Train fraction written to split.csv.
        #[arg(long)]
        split: Option<f64>,
    },
    /// Forecasting, event, fidelity, spectral and modal metrics.
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Write seeded synthetic ISO_zone_<k>.csv profiles.
    SynthProfiles {
        #[arg(long, default_value_t = 1)]
        zones: usize,
        #[arg(long, default_value = "2018-01-01T00:00:00")]
        start: String,
        #[arg(long, default_value_t = 1440)]
        minutes: usize,
    },
}

#[derive(Debug, Args)]
struct ProfileArgs {
    /// Directory of ISO_zone_<k>.csv files.
    #[arg(long, conflicts_with = "synthetic")]
    profiles: Option<PathBuf>,
    /// Use a seeded synthetic zone instead of profile files.
    #[arg(long)]
    synthetic: bool,
}

impl ProfileArgs {
    fn source(&self, seed: u64) -> Option<ProfileSource> {
        match (&self.profiles, self.synthetic) {
            (Some(p), _) => Some(ProfileSource::Dir(p.clone())),
            (None, true) => Some(ProfileSource::Synthetic { seed }),
            (None, false) => None,
        }
    }
}

enum Failure {
    Usage(anyhow::Error),
    Solver(anyhow::Error),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.exit_code() == 1 {
            Failure::Usage(e.into())
        } else {
            Failure::Solver(e.into())
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn time_arg(s: &str) -> Result<chrono::NaiveDateTime, Failure> {
    parse_time(s).ok_or_else(|| usage(anyhow!("bad timestamp {s:?}; expected YYYY-MM-DDTHH:MM:SS")))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Validate { case } => {
            let net = load_case(case).map_err(|e| usage(anyhow!("{}: {e}", case.display())))?;
            let nodes: usize = net.feeders.iter().map(|f| f.nodes.len()).sum();
            println!(
                "{}: {} buses, {} branches, {} generators, {} loads, {} feeders ({} nodes)",
                case.display(),
                net.n_buses(),
                net.branches.len(),
                net.generators.len(),
                net.loads.len(),
                net.feeders.len(),
                nodes
            );
        }
        Command::Pf { case, load_scale } => {
            let net = load_case(case).map_err(|e| usage(anyhow!("{}: {e}", case.display())))?;
            let inj = Injections::base(&net).scale_loads(*load_scale);
            let sol = iterate_td_powerflow(&net, &inj, &TdOptions::default())
                .map_err(|e| Failure::Solver(e.into()))?;
            let buses: Vec<_> = net
                .buses
                .iter()
                .enumerate()
                .map(|(i, b)| serde_json::json!({"bus": b.id, "vm": sol.pf.vm[i], "va": sol.pf.va[i]}))
                .collect();
            let report = serde_json::json!({
                "outer_iterations": sol.iterations,
                "boundary_mismatch": sol.boundary_mismatch(),
                "losses": sol.pf.losses(&net),
                "buses": buses,
            });
            let text = serde_json::to_string_pretty(&report).expect("json");
            match &cli.out {
                Some(p) => write_file(p, &text).map_err(Failure::Solver)?,
                None => {
                    let _ = writeln!(std::io::stdout().lock(), "{text}");
                }
            }
        }
        Command::Steady {
            case,
            profiles,
            from,
            to,
            case_index,
            load_multiplier,
        } => {
            let source = profiles
                .source(cli.seed)
                .ok_or_else(|| usage(anyhow!("steady needs --profiles <dir> or --synthetic")))?;
            let mut args =
                SteadyArgs::new(case.clone(), source, time_arg(from)?, time_arg(to)?, out_dir(cli));
            args.case_index = *case_index;
            args.load_multiplier = *load_multiplier;
            let m = run_steady_pipeline(&args)?;
            println!("wrote {} files to {}", m.outputs.len(), args.out.display());
        }
        Command::Transient {
            case,
            profiles,
            n,
            kind_weights,
            duration,
            split,
        } => {
            let mut args = TransientArgs::new(case.clone(), *n, cli.seed, out_dir(cli));
            args.profiles = profiles.source(cli.seed);
            args.duration = *duration;
            args.train_fraction = *split;
            if let Some(w) = kind_weights {
                args.weights = w.parse::<KindWeights>().map_err(|e| usage(anyhow!(e)))?;
            }
            let m = run_transient_pipeline(&args)?;
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "wrote {} files to {} ({} warnings)",
                m.outputs.len(),
                args.out.display(),
                m.warnings.len()
            );
        }
        Command::Metrics(cmd) => match &cli.out {
            Some(p) => {
                let mut buf = Vec::new();
                metrics::run(cmd, &mut buf).map_err(Failure::Usage)?;
                write_file(p, std::str::from_utf8(&buf).expect("csv is utf-8")).map_err(Failure::Usage)?;
            }
            None => metrics::run(cmd, &mut std::io::stdout().lock()).map_err(Failure::Usage)?,
        },
        Command::SynthProfiles {
            zones,
            start,
            minutes,
        } => {
            let start = time_arg(start)?;
            let dir = out_dir(cli);
            fs::create_dir_all(&dir)
                .with_context(|| dir.display().to_string())
                .map_err(Failure::Usage)?;
            for k in 1..=*zones {
                let cfg = SyntheticZone {
                    zone: k.to_string(),
                    start,
                    minutes: *minutes,
                    seed: cli.seed.wrapping_add(k as u64),
                    ..Default::default()
                };
                let path = dir.join(format!("ISO_zone_{k}.csv"));
                let file = fs::File::create(&path)
                    .with_context(|| path.display().to_string())
                    .map_err(Failure::Usage)?;
                write_zone_csv(&synth_zone(&cfg), file).map_err(|e| Failure::Usage(e.into()))?;
            }
            println!("wrote {zones} zone files to {}", dir.display());
        }
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path).with_context(|| path.display().to_string())?;
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
