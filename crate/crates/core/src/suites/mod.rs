//! Registered verification suites `AC1` … `AC15`, each producing report rows
//! judged against the thresholds in [`tolerances`].

mod criteria;
pub mod tolerances;

use thiserror::Error;

use crate::analytic::AnalyticError;
use crate::cascade::CascadeError;
use crate::duality::DualityError;
use crate::engine::EngineError;
use crate::laws::LawError;
use crate::partition::PartitionError;
use crate::stats::{ReportRow, StatsError};
use crate::types::mix64;
pub use tolerances::{rule, Rule, TOLERANCES, UNATTAINABLE};

pub const SUITE_IDS: [&str; 15] = [
    "AC1", "AC2", "AC3", "AC4", "AC5", "AC6", "AC7", "AC8", "AC9", "AC10", "AC11", "AC12", "AC13", "AC14", "AC15",
];

pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("unknown suite `{0}`; expected one of AC1..AC15 or all")]
    UnknownSuite(String),
    #[error("no tolerance registered for row `{0}`")]
    MissingTolerance(String),
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Duality(#[from] DualityError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Overrides the main Monte Carlo replica count of every criterion.
    pub replicas: Option<usize>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            replicas: None,
        }
    }
}

impl SuiteOptions {
    pub(crate) fn replicas(&self, default: usize) -> usize {
        self.replicas.unwrap_or(default)
    }

    /// Independent seed for the `k`-th sub-experiment.
    pub(crate) fn seed_for(&self, k: u64) -> u64 {
        mix64(self.seed ^ mix64(k.wrapping_add(1)))
    }
}

/// Canonical suite id (`"ac3"` → `"AC3"`), if registered.
pub fn canonical_id(id: &str) -> Option<&'static str> {
    SUITE_IDS.iter().copied().find(|s| s.eq_ignore_ascii_case(id))
}

/// Suite ids selected by `selector` (`all` or a single id).
pub fn select(selector: &str) -> Result<Vec<&'static str>, SuiteError> {
    if selector.eq_ignore_ascii_case("all") {
        return Ok(SUITE_IDS.to_vec());
    }
    canonical_id(selector)
        .map(|id| vec![id])
        .ok_or_else(|| SuiteError::UnknownSuite(selector.to_string()))
}

pub fn run_suite(id: &str, opts: &SuiteOptions) -> Result<Vec<ReportRow>, SuiteError> {
    let id = canonical_id(id).ok_or_else(|| SuiteError::UnknownSuite(id.to_string()))?;
    match id {
        "AC1" => criteria::ac1(),
        "AC2" => criteria::ac2(),
        "AC3" => criteria::ac3(opts),
        "AC4" => criteria::ac4(opts),
        "AC5" => criteria::ac5(opts),
        "AC6" => criteria::ac6(opts),
        "AC7" => criteria::ac7(opts),
        "AC8" => criteria::ac8(opts),
        "AC9" => criteria::ac9(opts),
        "AC10" => criteria::ac10(opts),
        "AC11" => criteria::ac11(opts),
        "AC12" => criteria::ac12(opts),
        "AC13" => criteria::ac13(opts),
        "AC14" => criteria::ac14(opts),
        _ => criteria::ac15(opts),
    }
}

/// Rows of every suite selected by `selector`, in registration order.
pub fn run_selected(selector: &str, opts: &SuiteOptions) -> Result<Vec<ReportRow>, SuiteError> {
    let mut rows = Vec::new();
    for id in select(selector)? {
        rows.extend(run_suite(id, opts)?);
    }
    Ok(rows)
}

/// Judges `statistic` against `expected` with the registered rule for `id`.
pub(crate) fn judge(
    id: &str,
    statistic: f64,
    expected: f64,
    std_err: Option<f64>,
    p_value: Option<f64>,
) -> Result<ReportRow, SuiteError> {
    let r = rule(id).ok_or_else(|| SuiteError::MissingTolerance(id.to_string()))?;
    let diff = (statistic - expected).abs();
    let (expected, tolerance, pass) = match r {
        Rule::Abs(t) => (expected, t, diff <= t),
        Rule::Rel(t) => (expected, t * expected.abs(), diff <= t * expected.abs()),
        Rule::StdErrs(k) => {
            let tol = k * std_err.unwrap_or(0.0);
            (expected, tol, diff <= tol)
        }
        Rule::Range(lo, hi) => (0.5 * (lo + hi), 0.5 * (hi - lo), (lo..=hi).contains(&statistic)),
        Rule::PValueAbove(level) => (expected, level, p_value.is_some_and(|p| p > level)),
        Rule::Below(bound) => (expected, bound, statistic < bound),
    };
    Ok(ReportRow {
        criterion_id: id.to_string(),
        statistic,
        expected,
        tolerance,
        p_value,
        pass,
    })
}
