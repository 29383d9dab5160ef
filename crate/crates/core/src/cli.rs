//! Configuration loading, trace files and command dispatch.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{validate_trace, TraceReport};
use crate::domain::{validate_config, ConfigViolation, SimConfig};
use crate::engine::{run, setup_initial_population, CouplingEvent, EngineError, Trace, WorldState};
use crate::experiments::{
    export_errorbar_svg, export_sweep_csv, percent_range, sweep_with, ExperimentError, Parallelism,
    SweepParam,
};
use crate::metrics::{compute_counters, CounterSnapshot, COUNTER_FIELDS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid configuration:\n{}", render_violations(.0))]
    Violations(Vec<ConfigViolation>),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{0}")]
    Usage(String),
}

fn render_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Parses a configuration without checking its invariants.
pub fn parse_config(text: &str) -> Result<SimConfig, serde_json::Error> {
    serde_json::from_str(text)
}

/// Reads and validates a JSON configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig, CliError> {
    let cfg = read_config_unchecked(path)?;
    let violations = validate_config(&cfg);
    if violations.is_empty() {
        Ok(cfg)
    } else {
        Err(CliError::Violations(violations))
    }
}

fn read_config_unchecked(path: &Path) -> Result<SimConfig, CliError> {
    let text = read(path)?;
    parse_config(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_config(cfg: &SimConfig, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    write(path, &text)
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// On-disk form of a [`Trace`].
///
/// `final_counters` is the last snapshot (or the initial counters for a
/// zero-month run). `snapshots` and `final_state` let the validator check
/// month-by-month accounting and the committed partnerships.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub config: SimConfig,
    pub seed: u64,
    pub events: Vec<CouplingEvent>,
    pub final_counters: CounterSnapshot,
    pub snapshots: Vec<CounterSnapshot>,
    pub final_state: WorldState,
}

impl TraceFile {
    pub fn from_trace(trace: &Trace) -> Self {
        TraceFile {
            config: trace.config.clone(),
            seed: trace.seed,
            events: trace.events.clone(),
            final_counters: compute_counters(&trace.final_state),
            snapshots: trace.snapshots.clone(),
            final_state: trace.final_state.clone(),
        }
    }

    pub fn into_trace(self) -> Trace {
        Trace {
            config: self.config,
            seed: self.seed,
            events: self.events,
            snapshots: self.snapshots,
            final_state: self.final_state,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), CliError> {
    write(path, &TraceFile::from_trace(trace).to_json())
}

pub fn read_trace(path: &Path) -> Result<TraceFile, CliError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Validates a trace file, including the agreement of `final_counters` with
/// the replayed final state.
pub fn validate_trace_file(file: TraceFile) -> TraceReport {
    let final_counters = file.final_counters;
    let trace = file.into_trace();
    let mut report = validate_trace(&trace);
    let recorded_final = if trace.config.ticks == 0 {
        setup_initial_population(&trace.config)
            .map(|w| compute_counters(&w))
            .ok()
    } else {
        trace.snapshots.last().copied()
    };
    if recorded_final != Some(final_counters) {
        report
            .structural
            .push("final_counters disagree with the recorded snapshots".to_string());
        report.passed = false;
    }
    report
}

/// Month-by-month counters plus new infections per month.
pub fn timeseries_csv(trace: &Trace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["tick"];
    header.extend(COUNTER_FIELDS);
    header.push("new_infections");
    w.write_record(&header).expect("in-memory csv");
    let mut previous_total = setup_initial_population(&trace.config)
        .map(|w| compute_counters(&w).total_infected)
        .unwrap_or(trace.config.max_infected_fsw);
    for s in &trace.snapshots {
        let mut row = vec![s.tick.to_string()];
        row.extend(s.counters().iter().map(u32::to_string));
        row.push((s.total_infected - previous_total).to_string());
        previous_total = s.total_infected;
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

#[derive(Debug, Parser)]
#[command(name = "hivsim", version, about = "Agent-based HIV spread simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation; writes timeseries.csv and trace.json
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Sweep commitment or condom usage with replicated runs
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
        #[arg(long)]
        step: u32,
        #[arg(long)]
        replicates: u32,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads; 0 picks automatically
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Check a trace file against the model contracts
    Validate {
        #[arg(long)]
        trace: PathBuf,
        /// Print the report as JSON
        #[arg(long)]
        json: bool,
    },
    /// Validate a configuration file
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Entry point: returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAILURE
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<i32, CliError> {
    match command {
        Command::Run { config, out: dir } => {
            let cfg = load_config(&config)?;
            let trace = run(&cfg)?;
            ensure_dir(&dir)?;
            write(&dir.join("timeseries.csv"), &timeseries_csv(&trace))?;
            write_trace(&trace, &dir.join("trace.json"))?;
            let last = compute_counters(&trace.final_state);
            let _ = writeln!(
                out,
                "ran {} month(s), {} event(s), total infected {}",
                cfg.ticks,
                trace.events.len(),
                last.total_infected
            );
            Ok(EXIT_OK)
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            step,
            replicates,
            out: dir,
            threads,
        } => {
            let param: SweepParam = param
                .parse()
                .map_err(|e: ExperimentError| CliError::Usage(e.to_string()))?;
            if step == 0 || from > to || to > 100 || replicates == 0 {
                return Err(CliError::Usage(
                    "need 0 <= from <= to <= 100, step > 0 and replicates > 0".to_string(),
                ));
            }
            let values =
                percent_range(from, to, step).map_err(|e| CliError::Usage(e.to_string()))?;
            let cfg = load_config(&config)?;
            let par = match threads {
                0 => Parallelism::Auto,
                k => Parallelism::Threads(k),
            };
            let result = sweep_with(&cfg, param, &values, replicates, cfg.seed, par)?;
            ensure_dir(&dir)?;
            let base = dir.join("sweep");
            let (reps, aggs) = export_sweep_csv(&result, &base)?;
            for metric in COUNTER_FIELDS {
                export_errorbar_svg(&result, metric, &dir.join(format!("sweep.{metric}.svg")))?;
            }
            let _ = writeln!(
                out,
                "swept {} over {} value(s) x {} replicate(s): {} and {}",
                param,
                values.len(),
                replicates,
                reps.display(),
                aggs.display()
            );
            Ok(EXIT_OK)
        }
        Command::Validate { trace, json } => {
            let file = read_trace(&trace)?;
            let report = validate_trace_file(file);
            if json {
                let _ = writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serializes")
                );
            } else {
                let _ = write!(out, "{report}");
            }
            Ok(if report.passed { EXIT_OK } else { EXIT_FAILURE })
        }
        Command::Check { config } => {
            let cfg = read_config_unchecked(&config)?;
            let violations = validate_config(&cfg);
            if violations.is_empty() {
                let _ = writeln!(out, "ok");
                Ok(EXIT_OK)
            } else {
                for v in &violations {
                    let _ = writeln!(out, "{v}");
                }
                Ok(EXIT_FAILURE)
            }
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}
