//! Replicated runs and one-parameter sweeps.
//!
//! Replicate `i` of sweep point `k` always runs with seed
//! `base_seed + k·n + i`, and results are assembled in index order, so the
//! output is identical for any degree of parallelism.

mod export;
mod stats;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Percent, SimConfig};
use crate::engine::{ensure_valid, run_final_counters, EngineError};
use crate::metrics::{CounterSnapshot, COUNTER_FIELDS};

pub use export::{
    export_errorbar_svg, export_sweep_csv, format_significant, render_errorbar_svg,
    sweep_aggregates_csv, sweep_replicates_csv,
};
pub use stats::{aggregate, Aggregate, Z_95};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot aggregate an empty sample")]
    EmptyInput,
    #[error("replicate count must be positive")]
    NoReplicates,
    #[error("sweep needs at least one parameter value")]
    NoValues,
    #[error("unknown sweep parameter `{0}` (expected commitment or condom_usage)")]
    UnknownParam(String),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output for {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// The two swept behaviour parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Commitment,
    CondomUsage,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Commitment => "commitment",
            SweepParam::CondomUsage => "condom_usage",
        }
    }

    pub fn apply(self, cfg: &SimConfig, value: Percent) -> SimConfig {
        let mut out = cfg.clone();
        match self {
            SweepParam::Commitment => out.commitment = value,
            SweepParam::CondomUsage => out.condom_usage = value,
        }
        out
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "commitment" => Ok(SweepParam::Commitment),
            "condom_usage" => Ok(SweepParam::CondomUsage),
            other => Err(ExperimentError::UnknownParam(other.to_string())),
        }
    }
}

/// How many worker threads replicate runs may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    Threads(usize),
    #[default]
    Auto,
}

impl Parallelism {
    fn map_ordered<T, R, F>(self, items: Vec<T>, f: F) -> Result<Vec<R>, ExperimentError>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        match self {
            Parallelism::Sequential | Parallelism::Threads(0 | 1) => {
                Ok(items.into_iter().map(f).collect())
            }
            Parallelism::Auto => Ok(items.into_par_iter().map(f).collect()),
            Parallelism::Threads(k) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
                Ok(pool.install(|| items.into_par_iter().map(f).collect()))
            }
        }
    }
}

fn run_seeds(
    jobs: Vec<(SimConfig, u64)>,
    par: Parallelism,
) -> Result<Vec<CounterSnapshot>, ExperimentError> {
    par.map_ordered(jobs, |(cfg, seed)| run_final_counters(&cfg.with_seed(seed)))?
        .into_iter()
        .map(|r| r.map_err(ExperimentError::from))
        .collect()
}

/// Final counters of `n` runs seeded `base_seed + i`, in replicate order.
pub fn run_replicates(
    cfg: &SimConfig,
    n: u32,
    base_seed: u64,
) -> Result<Vec<CounterSnapshot>, ExperimentError> {
    run_replicates_with(cfg, n, base_seed, Parallelism::Auto)
}

pub fn run_replicates_with(
    cfg: &SimConfig,
    n: u32,
    base_seed: u64,
    par: Parallelism,
) -> Result<Vec<CounterSnapshot>, ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::NoReplicates);
    }
    ensure_valid(cfg)?;
    let jobs = (0..u64::from(n))
        .map(|i| (cfg.clone(), base_seed.wrapping_add(i)))
        .collect();
    run_seeds(jobs, par)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: u32,
    pub seed: u64,
    pub snapshot: CounterSnapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: Percent,
    pub replicates: Vec<ReplicateResult>,
    /// One entry per counter, in `COUNTER_FIELDS` order.
    pub aggregates: Vec<(String, Aggregate)>,
}

impl SweepPoint {
    pub fn aggregate_of(&self, metric: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|(name, _)| name == metric)
            .map(|(_, a)| a)
    }

    pub fn values_of(&self, metric: &str) -> Option<Vec<u32>> {
        self.replicates
            .iter()
            .map(|r| r.snapshot.counter(metric))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub replicates_per_point: u32,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn point(&self, value: u32) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.value.value() == value)
    }
}

fn aggregate_point(
    replicates: &[ReplicateResult],
) -> Result<Vec<(String, Aggregate)>, ExperimentError> {
    COUNTER_FIELDS
        .iter()
        .map(|&name| {
            let values: Vec<f64> = replicates
                .iter()
                .map(|r| f64::from(r.snapshot.counter(name).unwrap_or_default()))
                .collect();
            Ok((name.to_string(), aggregate(&values)?))
        })
        .collect()
}

pub fn sweep(
    base_cfg: &SimConfig,
    param: SweepParam,
    values: &[Percent],
    n: u32,
    base_seed: u64,
) -> Result<SweepResult, ExperimentError> {
    sweep_with(base_cfg, param, values, n, base_seed, Parallelism::Auto)
}

/// Runs `n` replicates at every value of `param`.
pub fn sweep_with(
    base_cfg: &SimConfig,
    param: SweepParam,
    values: &[Percent],
    n: u32,
    base_seed: u64,
    par: Parallelism,
) -> Result<SweepResult, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::NoValues);
    }
    if n == 0 {
        return Err(ExperimentError::NoReplicates);
    }
    ensure_valid(base_cfg)?;

    let seed_of = |k: usize, i: u32| {
        base_seed
            .wrapping_add((k as u64).wrapping_mul(u64::from(n)))
            .wrapping_add(u64::from(i))
    };
    let mut jobs = Vec::with_capacity(values.len() * n as usize);
    for (k, &v) in values.iter().enumerate() {
        let cfg = param.apply(base_cfg, v);
        for i in 0..n {
            jobs.push((cfg.clone(), seed_of(k, i)));
        }
    }
    let snapshots = run_seeds(jobs, par)?;

    let points = values
        .iter()
        .enumerate()
        .map(|(k, &value)| {
            let start = k * n as usize;
            let replicates: Vec<ReplicateResult> = snapshots[start..start + n as usize]
                .iter()
                .enumerate()
                .map(|(i, s)| ReplicateResult {
                    replicate: i as u32,
                    seed: seed_of(k, i as u32),
                    snapshot: *s,
                })
                .collect();
            let aggregates = aggregate_point(&replicates)?;
            Ok(SweepPoint {
                value,
                replicates,
                aggregates,
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    Ok(SweepResult {
        param,
        replicates_per_point: n,
        points,
    })
}

/// `from, from+step, …` up to and including `to` when it lies on the grid.
pub fn percent_range(
    from: u32,
    to: u32,
    step: u32,
) -> Result<Vec<Percent>, crate::domain::DomainError> {
    let mut out = Vec::new();
    if step == 0 {
        return Ok(out);
    }
    let mut v = from;
    while v <= to {
        out.push(Percent::new(v)?);
        v += step;
    }
    Ok(out)
}
