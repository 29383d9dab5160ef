//! Deterministic agent-based simulation of HIV spread among female sex
//! workers, their clients, the clients' committed partners and uncommitted
//! women.
//!
//! - [`domain`]: agent and configuration types
//! - [`engine`]: setup, partnering, coupling and the monthly tick loop
//! - [`contracts`]: executable state/operation predicates and a trace validator
//! - [`metrics`]: per-tick output counters
//! - [`experiments`]: replicated runs, sweeps, CSV and SVG output
//! - [`cli`]: configuration files, trace files and the command-line front end

pub mod cli;
pub mod contracts;
pub mod domain;
pub mod engine;
pub mod experiments;
pub mod metrics;

pub use domain::{Percent, Person, PersonId, PersonType, SimConfig};
pub use engine::{run, Trace, WorldState};
pub use metrics::CounterSnapshot;
