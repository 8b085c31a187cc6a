//! Statistical verification: weighted empirical measures, limit-theorem
//! estimators and goodness-of-fit tests.

mod estimators;
mod hypothesis;
mod weighted;

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use estimators::{
    additive_martingale, clt_functional, largest_rate, lln_functional, median, ratio_estimate, scaled_moment,
    CltEstimate, MIN_REPLICAS,
};
pub use hypothesis::{
    chi2_homogeneity, chi2_sf, chi2_test, kolmogorov_q, ks_one_sample, ks_p_value, ks_statistic, ks_two_sample, Criterion,
    TestReport, MIN_SAMPLE,
};
pub use weighted::{
    effective_sample_size, resample_to_ess, weighted_ks, weighted_ks_statistic, WeightedEmpirical,
};

use crate::analytic::AnalyticError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("need at least {needed} replicas, got {got}")]
    InsufficientReplicas { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("threshold too large: ln epsilon = {log_epsilon} must be below {bound}")]
    ThresholdTooLarge { log_epsilon: f64, bound: f64 },
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub criterion_id: String,
    pub statistic: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub p_value: Option<f64>,
    pub pass: bool,
}

/// `criterion_id,statistic,expected,tolerance,p_value,pass`; missing p-values are empty.
pub fn write_report_csv<W: Write>(out: &mut W, rows: &[ReportRow]) -> io::Result<()> {
    writeln!(out, "criterion_id,statistic,expected,tolerance,p_value,pass")?;
    for r in rows {
        let p = r.p_value.map(|p| p.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.criterion_id, r.statistic, r.expected, r.tolerance, p, r.pass
        )?;
    }
    Ok(())
}
