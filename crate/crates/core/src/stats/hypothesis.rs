use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use super::StatsError;

/// Minimum sample size accepted by the goodness-of-fit tests.
pub const MIN_SAMPLE: usize = 30;

/// Outcome of one statistical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
    pub sample_sizes: Vec<usize>,
    /// Significance level or statistic bound, depending on `criterion`.
    pub tolerance: f64,
    pub criterion: Criterion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Passes when `p_value > tolerance`.
    PValueAbove,
    /// Passes when `statistic < tolerance`.
    StatisticBelow,
}

impl TestReport {
    pub fn new(statistic: f64, p_value: f64, sample_sizes: Vec<usize>, criterion: Criterion, tolerance: f64) -> Self {
        let pass = match criterion {
            Criterion::PValueAbove => p_value > tolerance,
            Criterion::StatisticBelow => statistic < tolerance,
        };
        Self {
            statistic,
            p_value,
            pass,
            sample_sizes,
            tolerance,
            criterion,
        }
    }

    /// Same statistic judged by a different rule.
    pub fn judged(self, criterion: Criterion, tolerance: f64) -> Self {
        Self::new(self.statistic, self.p_value, self.sample_sizes, criterion, tolerance)
    }
}

/// Asymptotic Kolmogorov tail `P(K > λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kolmogorov p-value for statistic `d` at effective size `n`, with the
/// finite-sample correction of Stephens.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

fn sorted_finite(x: &[f64]) -> Result<Vec<f64>, StatsError> {
    if x.iter().any(|v| v.is_nan()) {
        return Err(StatsError::Degenerate("sample contains NaN".into()));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn require_size(n: usize) -> Result<(), StatsError> {
    if n < MIN_SAMPLE {
        return Err(StatsError::InsufficientSamples {
            needed: MIN_SAMPLE,
            got: n,
        });
    }
    Ok(())
}

/// One-sample KS test of `sample` against a continuous `cdf`; passes at `level`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64, level: f64) -> Result<TestReport, StatsError> {
    require_size(sample.len())?;
    let x = sorted_finite(sample)?;
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, &xi) in x.iter().enumerate() {
        let f = cdf(xi);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(TestReport::new(d, ks_p_value(d, n), vec![x.len()], Criterion::PValueAbove, level))
}

/// Two-sample KS statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let (a, b) = (sorted_finite(a)?, sorted_finite(b)?);
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::Degenerate("empty sample".into()));
    }
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Two-sample KS test; passes at `level`.
pub fn ks_two_sample(a: &[f64], b: &[f64], level: f64) -> Result<TestReport, StatsError> {
    require_size(a.len())?;
    require_size(b.len())?;
    let d = ks_statistic(a, b)?;
    let (n, m) = (a.len() as f64, b.len() as f64);
    let p = ks_p_value(d, n * m / (n + m));
    Ok(TestReport::new(d, p, vec![a.len(), b.len()], Criterion::PValueAbove, level))
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(df: f64, stat: f64) -> f64 {
    if stat <= 0.0 {
        1.0
    } else {
        gamma_ur(df / 2.0, stat / 2.0)
    }
}

/// Pearson goodness-of-fit test of observed counts against expected counts
/// (`k − 1` degrees of freedom); passes at `level`.
pub fn chi2_test(counts: &[u64], expected: &[f64], level: f64) -> Result<TestReport, StatsError> {
    if counts.len() != expected.len() || counts.len() < 2 {
        return Err(StatsError::Degenerate("need at least two matching categories".into()));
    }
    if expected.iter().any(|&e| !(e > 0.0)) {
        return Err(StatsError::Degenerate("expected counts must be positive".into()));
    }
    let n: u64 = counts.iter().sum();
    require_size(n as usize)?;
    let stat: f64 = counts
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = (counts.len() - 1) as f64;
    let p = chi2_sf(df, stat);
    Ok(TestReport::new(stat, p, vec![n as usize], Criterion::PValueAbove, level))
}

/// Chi-square test that two count vectors come from one distribution.
/// Categories are pooled from the right until every pooled expected count
/// is at least 5.
pub fn chi2_homogeneity(a: &[u64], b: &[u64], level: f64) -> Result<TestReport, StatsError> {
    let k = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
    let (na, nb): (u64, u64) = (a.iter().sum(), b.iter().sum());
    require_size(na as usize)?;
    require_size(nb as usize)?;
    let total = (na + nb) as f64;
    let min_share = (na.min(nb)) as f64 / total;
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0u64, 0u64);
    for i in 0..k {
        acc.0 += get(a, i);
        acc.1 += get(b, i);
        if (acc.0 + acc.1) as f64 * min_share >= 5.0 {
            cells.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 {
        return Ok(TestReport::new(0.0, 1.0, vec![na as usize, nb as usize], Criterion::PValueAbove, level));
    }
    let mut stat = 0.0;
    for &(x, y) in &cells {
        let col = (x + y) as f64;
        for (obs, n) in [(x, na), (y, nb)] {
            let e = col * n as f64 / total;
            stat += (obs as f64 - e).powi(2) / e;
        }
    }
    let df = (cells.len() - 1) as f64;
    let p = chi2_sf(df, stat);
    Ok(TestReport::new(stat, p, vec![na as usize, nb as usize], Criterion::PValueAbove, level))
}
