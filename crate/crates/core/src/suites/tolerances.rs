//! Every acceptance threshold, keyed by report row id.

/// How a report row is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// `|statistic - expected| <= tol`.
    Abs(f64),
    /// `|statistic - expected| <= tol · |expected|`.
    Rel(f64),
    /// `|statistic - expected| <= k · standard error`.
    StdErrs(f64),
    /// `lo <= statistic <= hi`.
    Range(f64, f64),
    /// Test p-value strictly above the level.
    PValueAbove(f64),
    /// Statistic strictly below the bound.
    Below(f64),
}

pub const TOLERANCES: &[(&str, Rule)] = &[
    ("AC1.kappa_closed_forms", Rule::Abs(1e-12)),
    ("AC1.sigma_closed_forms", Rule::Abs(1e-12)),
    ("AC1.kappa_at_one_conservative", Rule::Abs(0.0)),
    ("AC2.p_star_conservative", Rule::Abs(0.0)),
    ("AC2.p_star_lossy", Rule::Abs(1e-9)),
    ("AC2.p_bar_uniform", Rule::Abs(1e-9)),
    ("AC2.p_bar_tangency", Rule::Abs(1e-9)),
    ("AC3.sum_sq_t1", Rule::StdErrs(3.0)),
    ("AC3.sum_sq_t2", Rule::StdErrs(3.0)),
    ("AC3.tagged_t3", Rule::StdErrs(3.0)),
    ("AC3.tagged_t3_erosion", Rule::StdErrs(3.0)),
    ("AC4.sum_sq_t4", Rule::StdErrs(3.0)),
    ("AC4.moment_series", Rule::Abs(1e-10)),
    ("AC5.scaled_sum_sq", Rule::Range(1.85, 2.1)),
    ("AC5.scaled_moment_k2", Rule::Rel(0.10)),
    ("AC6.lln_mean", Rule::Abs(0.02)),
    ("AC6.clt_variance", Rule::Abs(0.1)),
    ("AC6.clt_mean", Rule::Abs(0.05)),
    ("AC7.largest_rate", Rule::Abs(0.03)),
    ("AC8.conservative_martingale", Rule::Abs(1e-12)),
    ("AC8.lossy_mean", Rule::StdErrs(4.0)),
    ("AC8.fixed_point_ks", Rule::Below(0.05)),
    ("AC9.unit_cost", Rule::Range(1.8, 2.2)),
    ("AC9.beta2_change_1e-2_1e-3", Rule::Below(0.05)),
    ("AC9.beta2_change_1e-3_1e-4", Rule::Below(0.05)),
    ("AC10.weighted_ks", Rule::Below(0.05)),
    ("AC10.total_weight", Rule::Abs(0.05)),
    ("AC11.frequency_first", Rule::Abs(0.02)),
    ("AC11.frequency_second", Rule::Abs(0.02)),
    ("AC11.singleton_fraction", Rule::Abs(0.02)),
    ("AC11.refinement", Rule::Abs(0.0)),
    ("AC11.exchangeability", Rule::PValueAbove(0.01)),
    ("AC12.largest_ks", Rule::PValueAbove(0.01)),
    ("AC12.identity", Rule::Abs(0.0)),
    ("AC13.extinct_1e-4", Rule::Abs(0.0)),
    ("AC13.extinct_1e-3", Rule::Abs(0.0)),
    ("AC13.mean_time_stability", Rule::Below(0.05)),
    ("AC13.fixed_point_ks", Rule::Below(0.05)),
    ("AC13.dust_after_extinction", Rule::Abs(1e-12)),
    ("AC14.holding_n3", Rule::Rel(0.10)),
    ("AC14.pair_choice", Rule::PValueAbove(0.01)),
    ("AC14.cuts_vs_chain", Rule::PValueAbove(0.01)),
    ("AC15.count_distribution", Rule::PValueAbove(0.01)),
    ("AC15.determinism", Rule::Abs(0.0)),
    ("AC15.generator_closed", Rule::Abs(0.02)),
    ("AC15.generator_difference", Rule::Abs(0.02)),
];

pub fn rule(id: &str) -> Option<Rule> {
    TOLERANCES.iter().find(|(k, _)| *k == id).map(|(_, r)| *r)
}

/// Criteria whose stated threshold is not met by a faithful implementation,
/// with the reason. They are still run and reported as failures.
pub const UNATTAINABLE: &[(&str, &str)] = &[
    (
        "AC7",
        "the largest fragment decays like exp(-κ'(p̄) t) t^(-3/(2p̄)), so t^-1 ln X_1(t) carries a \
         -(3/(2p̄)) (ln t)/t ≈ -0.07 correction at t = 30; the finite-t mean sits near -0.22, \
         outside -0.1716 ± 0.03",
    ),
    (
        "AC14",
        "with n blocks the n-1 remaining cuts of (0,1) leave after the minimum of n-1 unit exponentials \
         in log time, so the holding time is Exp(n-1) with mean 1/2 at n = 3, not 1/3",
    ),
];
