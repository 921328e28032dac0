//! End-to-end runs with a digest manifest: steady minute series and
//! transient batches, plus the exit-code contract used by the command line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cosim::{
    run_batch, run_steady_series, BatchOptions, CosimError, KindWeights, ProfileBindings, SteadyRunConfig,
    TdOptions,
};
use crate::grid::{load_case, NetworkModel};
use crate::profiles::{format_time, read_profile_dir, synth_zone, ProfileError, ProfileSet, SyntheticZone};
use crate::records::write_pf_result;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    /// Bad arguments or unreadable inputs; nothing was written.
    #[error("{0}")]
    Usage(String),
    /// A solver failed; partial outputs were removed and the manifest
    /// records the failure.
    #[error("{0}")]
    Solver(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Usage(_) => 1,
            PipelineError::Solver(_) | PipelineError::Io { .. } => 2,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub case_path: String,
    pub profile_source: String,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputEntry>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub failure: Option<String>,
}

impl RunManifest {
    fn begin(command: &str, case_path: &Path, profile_source: String, seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            case_path: case_path.display().to_string(),
            profile_source,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started: Utc::now().to_rfc3339(),
            finished: String::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            failure: None,
        }
    }

    /// Digest over the output inventory only, so reruns that produce the
    /// same files compare equal regardless of wall time.
    pub fn inventory_digest(&self) -> String {
        let mut h = Sha256::new();
        for o in &self.outputs {
            h.update(o.path.as_bytes());
            h.update([0]);
            h.update(o.sha256.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))
    }

    fn finish(mut self, out: &Path, files: &[PathBuf]) -> Result<Self, PipelineError> {
        let mut files = files.to_vec();
        files.sort();
        files.dedup();
        for f in &files {
            let data = fs::read(f).map_err(io_err(f))?;
            let rel = f.strip_prefix(out).unwrap_or(f);
            self.outputs.push(OutputEntry {
                path: rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
                sha256: hex::encode(Sha256::digest(&data)),
                bytes: data.len() as u64,
            });
        }
        self.finished = Utc::now().to_rfc3339();
        let path = out.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))?;
        Ok(self)
    }
}

/// Where load, wind and solar profiles come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    /// Directory of `ISO_zone_<k>.csv` files.
    Dir(PathBuf),
    /// One seeded synthetic zone covering the requested window.
    Synthetic { seed: u64 },
}

impl ProfileSource {
    fn describe(&self) -> String {
        match self {
            ProfileSource::Dir(p) => p.display().to_string(),
            ProfileSource::Synthetic { seed } => format!("synthetic:{seed}"),
        }
    }

    /// Loads the profiles; synthetic ones span `[start, start + minutes)`.
    pub fn load(&self, start: NaiveDateTime, minutes: usize) -> Result<ProfileSet, PipelineError> {
        match self {
            ProfileSource::Dir(p) => {
                if !p.is_dir() {
                    return Err(PipelineError::Usage(format!(
                        "profile directory {} not found",
                        p.display()
                    )));
                }
                read_profile_dir(p).map_err(|e| PipelineError::Usage(e.to_string()))
            }
            ProfileSource::Synthetic { seed } => {
                let zone = SyntheticZone {
                    start,
                    minutes: minutes.max(1),
                    seed: *seed,
                    ..Default::default()
                };
                ProfileSet::new(vec![synth_zone(&zone)])
                    .map_err(|e: ProfileError| PipelineError::Usage(e.to_string()))
            }
        }
    }
}

fn load_network(path: &Path) -> Result<NetworkModel, PipelineError> {
    load_case(path).map_err(|e| PipelineError::Usage(format!("{}: {e}", path.display())))
}

fn prepare_out(out: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(out).map_err(io_err(out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyArgs {
    pub case_path: PathBuf,
    pub profiles: ProfileSource,
    pub start: NaiveDateTime,
    pub end: NaiveDateTime,
    /// Case number used in `case_<k>/pf_result_<k>.csv`.
    pub case_index: usize,
    pub load_multiplier: f64,
    pub bindings: ProfileBindings,
    pub td: TdOptions,
    pub out: PathBuf,
}

impl SteadyArgs {
    pub fn new(
        case_path: PathBuf,
        profiles: ProfileSource,
        start: NaiveDateTime,
        end: NaiveDateTime,
        out: PathBuf,
    ) -> Self {
        SteadyArgs {
            case_path,
            profiles,
            start,
            end,
            case_index: 1,
            load_multiplier: 1.0,
            bindings: ProfileBindings::default(),
            td: TdOptions::default(),
            out,
        }
    }
}

/// Minute-level steady run writing `case_<k>/pf_input_<k>.txt`,
/// `case_<k>/pf_result_<k>.csv` and the run manifest. On a solver failure
/// the case directory is removed and the manifest names the failing minute.
pub fn run_steady_pipeline(args: &SteadyArgs) -> Result<RunManifest, PipelineError> {
    if args.start >= args.end {
        return Err(PipelineError::Usage("--from must be before --to".into()));
    }
    let net = load_network(&args.case_path)?;
    let minutes = (args.end - args.start).num_minutes() as usize;
    let profiles = args.profiles.load(args.start, minutes)?;
    prepare_out(&args.out)?;
    let seed = match args.profiles {
        ProfileSource::Synthetic { seed } => Some(seed),
        ProfileSource::Dir(_) => None,
    };
    let mut manifest = RunManifest::begin("steady", &args.case_path, args.profiles.describe(), seed);

    let cfg = SteadyRunConfig {
        start: args.start,
        end: args.end,
        bindings: args.bindings.clone(),
        td: args.td,
        load_multiplier: args.load_multiplier,
    };
    let k = args.case_index;
    let dir = args.out.join(format!("case_{k}"));
    let series = match run_steady_series(&net, &profiles, &cfg) {
        Ok(s) => s,
        Err(e) => {
            let _ = fs::remove_dir_all(&dir);
            let msg = match &e {
                CosimError::AtTime { time, source } => format!("{}: {source}", format_time(time)),
                other => other.to_string(),
            };
            manifest.failure = Some(msg.clone());
            manifest.finish(&args.out, &[])?;
            return Err(PipelineError::Solver(msg));
        }
    };

    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let input_path = dir.join(format!("pf_input_{k}.txt"));
    let mut text = format!(
        "case {}\nprofiles {}\nfrom {}\nto {}\nload_multiplier {}\n",
        args.case_path.display(),
        args.profiles.describe(),
        format_time(&args.start),
        format_time(&args.end),
        args.load_multiplier
    );
    for (line, it) in series.inputs.iter().zip(&series.outer_iterations) {
        text.push_str(&format!("{line} outer_iterations={it}\n"));
    }
    let mut f = fs::File::create(&input_path).map_err(io_err(&input_path))?;
    f.write_all(text.as_bytes()).map_err(io_err(&input_path))?;
    let result_path = dir.join(format!("pf_result_{k}.csv"));
    write_pf_result(&series.frame.quantized(), &result_path)
        .map_err(|e| PipelineError::Solver(e.to_string()))?;
    manifest.finish(&args.out, &[input_path, result_path])
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientArgs {
    pub case_path: PathBuf,
    pub profiles: Option<ProfileSource>,
    pub count: usize,
    pub seed: u64,
    pub weights: KindWeights,
    pub duration: f64,
    /// Train fraction for `split.csv`.
    pub train_fraction: Option<f64>,
    pub out: PathBuf,
}

impl TransientArgs {
    pub fn new(case_path: PathBuf, count: usize, seed: u64, out: PathBuf) -> Self {
        TransientArgs {
            case_path,
            profiles: None,
            count,
            seed,
            weights: KindWeights::uniform(),
            duration: 4.0,
            train_fraction: None,
            out,
        }
    }
}

/// Scenario batch routed into `forced_oscillation/` and
/// `natural_oscillation/`. Failed scenarios become warnings; the run still
/// succeeds.
pub fn run_transient_pipeline(args: &TransientArgs) -> Result<RunManifest, PipelineError> {
    if args.count == 0 {
        return Err(PipelineError::Usage("--n must be at least 1".into()));
    }
    let net = load_network(&args.case_path)?;
    let profiles = match &args.profiles {
        // Synthetic operating points cover one year from the default start.
        Some(src) => Some(src.load(SyntheticZone::default().start, 365 * 1440)?),
        None => None,
    };
    prepare_out(&args.out)?;
    let mut manifest = RunManifest::begin(
        "transient",
        &args.case_path,
        args.profiles
            .as_ref()
            .map_or("case file".into(), |p| p.describe()),
        Some(args.seed),
    );
    let opts = BatchOptions {
        count: args.count,
        seed: args.seed,
        weights: args.weights.clone(),
        duration: args.duration,
        route_by_kind: true,
        train_fraction: args.train_fraction,
        ..Default::default()
    };
    let outcome = run_batch(&net, profiles.as_ref(), &opts, &args.out).map_err(|e| match e {
        CosimError::InvalidScenario(_) | CosimError::NoEligibleTarget(_) => {
            PipelineError::Usage(e.to_string())
        }
        other => PipelineError::Solver(other.to_string()),
    })?;
    manifest.warnings = outcome
        .failures
        .iter()
        .map(|(row, e)| format!("row {row}: {e}"))
        .collect();
    manifest.finish(&args.out, &outcome.files)
}
