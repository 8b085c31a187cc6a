//! Event-driven simulation of self-similar fragmentation chains.
//!
//! A fragment of size `x` splits after an exponential time of rate `x^α`;
//! the unit fragment splits at rate one. Time rescaling `t -> c t` recovers
//! any other base rate.

mod config;
mod functionals;
mod log;
mod sim;

use thiserror::Error;

pub use config::{Screening, SimConfig, SimConfigFile, DEFAULT_EVENT_CAP};
pub use functionals::{
    energy_cost, energy_costs, exit_samples, extinction_time, generator_additive, generator_multiplicative,
    CostSpec, ExitSample, ExtinctionOutcome, SizeFunctional,
};
pub use log::{run, run_replicas, write_events_csv, write_trajectory_csv, EventLog, Snapshot, SplitRecord};
pub use sim::{node_stream, run_with, Fragment, Observer, Population, RunSummary};

pub(crate) use sim::lifetime;

use crate::analytic::AnalyticError;
use crate::laws::LawError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("event budget of {cap} exceeded at time {time}")]
    EventBudgetExceeded { cap: u64, time: f64 },
    #[error("functional does not vanish near zero: {0}")]
    CutoffViolation(String),
}
