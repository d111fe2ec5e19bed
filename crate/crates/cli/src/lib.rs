//! Command-line front end for the offshore wind farm simulator.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use upsc_core::scenario::{preset_description, PRESET_NAMES};
use upsc_core::{compute_metrics, Metrics, RunRecord, RunStatus};

use crate::config::{load_config, RunConfig};
use crate::output::{read_record, write_metrics, write_record, RecordPaths};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "upsc",
    version,
    about = "Offshore wind farm black-start and power-ramp simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run presets or JSON config files and write CSV plus metrics.
    Run {
        /// Preset names or paths to JSON config files.
        #[arg(required = true)]
        targets: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Plant integration step (s).
        #[arg(long)]
        dt: Option<f64>,
        /// Control sample period (s).
        #[arg(long)]
        ts: Option<f64>,
        /// Simulated horizon (s), overriding the scenario's own.
        #[arg(long)]
        t_end: Option<f64>,
        /// Number of runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// List the built-in presets.
    ListPresets,
    /// Print a preset or config file as a complete, editable run config.
    ShowConfig { target: String },
    /// Recompute metrics of a recorded run (needs the `.header.json` sidecar).
    Metrics {
        csv: PathBuf,
        /// Also rewrite the `.metrics.json` sidecar.
        #[arg(long)]
        write: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Failure(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Failure(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(e) | Self::Failure(e) => write!(f, "{e:#}"),
        }
    }
}

/// Resolves a preset name or a config path.
pub fn resolve_target(target: &str) -> Result<RunConfig> {
    if let Some(spec) = upsc_core::preset(target) {
        return Ok(RunConfig::new(spec));
    }
    let path = Path::new(target);
    if path.exists() {
        return load_config(path);
    }
    anyhow::bail!("`{target}` is neither a preset (see `upsc list-presets`) nor an existing file")
}

pub struct RunOutcome {
    pub name: String,
    pub record: RunRecord,
    pub metrics: Metrics,
    pub paths: RecordPaths,
}

pub fn execute(cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    let record = upsc_core::run(&cfg.scenario, &cfg.sim)?;
    let metrics = compute_metrics(&record, &cfg.scenario);
    let name = cfg.scenario.name.clone();
    let paths = RecordPaths::in_dir(out_dir, &name);
    write_record(&record, &metrics, &paths)?;
    Ok(RunOutcome {
        name,
        record,
        metrics,
        paths,
    })
}

pub fn summary(name: &str, record: &RunRecord, m: &Metrics) -> String {
    let mut s = String::new();
    let status = match record.status() {
        RunStatus::Converged => "completed".to_string(),
        RunStatus::Diverged { t } => format!("diverged at {t:.4} s"),
    };
    let _ = write!(s, "{name}: {status}, los={}", m.los_detected);
    if let Some(t) = m.los_time {
        let _ = write!(s, " (t={t:.3} s)");
    }
    let _ = write!(
        s,
        ", voltage_settled={}, ramp_completed={}, reactive_imbalance={:.4}",
        m.voltage_settled, m.ramp_completed, m.reactive_imbalance
    );
    for (k, (v, i)) in m.settled_voltage.iter().zip(&m.max_current).enumerate() {
        let _ = write!(s, ", s{}: v={v:.4} i_max={i:.4}", k + 1);
    }
    s
}

fn run_command(
    targets: &[String],
    out: &Path,
    dt: Option<f64>,
    ts: Option<f64>,
    t_end: Option<f64>,
    jobs: usize,
) -> Result<Vec<String>, CliError> {
    let mut configs = Vec::with_capacity(targets.len());
    for t in targets {
        let mut cfg = resolve_target(t).map_err(CliError::Usage)?;
        if let Some(dt) = dt {
            cfg.sim.dt_plant = dt;
        }
        if let Some(ts) = ts {
            cfg.sim.ts_control = ts;
        }
        if t_end.is_some() {
            cfg.sim.t_end = t_end;
        }
        cfg.validate().map_err(CliError::Usage)?;
        configs.push(cfg);
    }
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(anyhow::anyhow!("cannot create {}: {e}", out.display())))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Failure(e.into()))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| configs.par_iter().map(|c| execute(c, out)).collect());

    let mut lines = Vec::with_capacity(results.len());
    for r in results {
        let o = r.map_err(CliError::Failure)?;
        lines.push(format!(
            "{} -> {}",
            summary(&o.name, &o.record, &o.metrics),
            o.paths.csv.display()
        ));
    }
    Ok(lines)
}

fn metrics_command(csv: &Path, write: bool) -> Result<Vec<String>, CliError> {
    let record = read_record(csv).map_err(CliError::Usage)?;
    let spec = record.header.scenario.clone();
    let m = compute_metrics(&record, &spec);
    if write {
        write_metrics(&m, &RecordPaths::from_csv(csv).metrics).map_err(CliError::Failure)?;
    }
    let json = serde_json::to_string_pretty(&m).map_err(|e| CliError::Failure(e.into()))?;
    Ok(vec![json])
}

/// Runs the CLI and returns lines for stdout.
pub fn dispatch<I, T>(args: I) -> Result<Vec<String>, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let text = e.to_string();
        CliError::Usage(anyhow::anyhow!("{}", text.trim_start_matches("error: ").trim_end()))
    })?;
    match cli.command {
        Command::Run {
            targets,
            out,
            dt,
            ts,
            t_end,
            jobs,
        } => run_command(&targets, &out, dt, ts, t_end, jobs),
        Command::ListPresets => Ok(PRESET_NAMES
            .iter()
            .map(|n| format!("{n:28} {}", preset_description(n).unwrap_or_default()))
            .collect()),
        Command::Metrics { csv, write } => metrics_command(&csv, write),
        Command::ShowConfig { target } => {
            let cfg = resolve_target(&target).map_err(CliError::Usage)?;
            Ok(vec![config::to_json(&cfg)])
        }
    }
}

/// Entry point shared by the binary: prints output and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    // Help and version requests are not errors.
    if let Err(e) = Cli::try_parse_from(&args) {
        use clap::error::ErrorKind;
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            print!("{e}");
            return EXIT_OK;
        }
    }
    match dispatch(args) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
