//! Simulation and analysis of self-similar fragmentation processes.

pub mod laws;
pub mod numeric;
pub mod types;
pub mod analytic;
pub mod engine;
pub mod par;
pub mod stats;
pub mod cascade;
pub mod partition;
pub mod duality;
pub mod suites;
