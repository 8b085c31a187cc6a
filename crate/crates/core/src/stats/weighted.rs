use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hypothesis::{ks_p_value, Criterion, TestReport};
use super::StatsError;
use crate::engine::Population;
use crate::types::{neumaier_sum, MassPartition};

/// Fragments of one replica at one time, as `(log size, log weight)` atoms.
///
/// The weight attached to a functional of exponent `p` is `w X^p`; outside
/// roulette runs `w = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEmpirical {
    pub time: f64,
    pub replica: u64,
    pub atoms: Vec<(f64, f64)>,
}

impl WeightedEmpirical {
    pub fn from_population(population: &Population<'_>, time: f64, replica: u64) -> Self {
        let mut atoms: Vec<(f64, f64)> = population.weighted_logs().collect();
        atoms.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
        Self { time, replica, atoms }
    }

    pub fn from_partition(partition: &MassPartition, time: f64, replica: u64) -> Self {
        Self {
            time,
            replica,
            atoms: partition.log_sizes().iter().map(|&l| (l, 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Σ w_i X_i^p`.
    pub fn power_sum(&self, p: f64) -> f64 {
        neumaier_sum(self.atoms.iter().map(|&(l, w)| (w + p * l).exp()))
    }

    /// `Σ w_i X_i^p f(ln X_i)`.
    pub fn functional(&self, p: f64, f: impl Fn(f64) -> f64) -> f64 {
        neumaier_sum(self.atoms.iter().map(|&(l, w)| (w + p * l).exp() * f(l)))
    }

    pub fn largest_log(&self) -> Option<f64> {
        self.atoms.iter().map(|a| a.0).max_by(f64::total_cmp)
    }
}

/// Kish effective sample size `(Σw)² / Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s = neumaier_sum(weights.iter().copied());
    let s2 = neumaier_sum(weights.iter().map(|w| w * w));
    if s2 == 0.0 {
        0.0
    } else {
        s * s / s2
    }
}

/// Sup distance between the weighted empirical CDF and `cdf`.
pub fn weighted_ks_statistic(values: &[f64], weights: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64, StatsError> {
    if values.len() != weights.len() || values.is_empty() {
        return Err(StatsError::Degenerate("values and weights must be non-empty and aligned".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(StatsError::Degenerate("weights must be nonnegative".into()));
    }
    let total = neumaier_sum(weights.iter().copied());
    if !(total > 0.0) {
        return Err(StatsError::Degenerate("zero total weight".into()));
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut acc = 0.0;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < idx.len() {
        let x = values[idx[i]];
        let f = cdf(x);
        d = d.max(f - acc / total);
        while i < idx.len() && values[idx[i]] == x {
            acc += weights[idx[i]];
            i += 1;
        }
        d = d.max(acc / total - f);
    }
    Ok(d)
}

/// Weighted one-sample KS: the statistic is the direct weighted distance,
/// the p-value uses the Kish effective sample size. Passes when the
/// statistic is below `max_distance`.
pub fn weighted_ks(
    values: &[f64],
    weights: &[f64],
    cdf: impl Fn(f64) -> f64,
    max_distance: f64,
) -> Result<TestReport, StatsError> {
    let d = weighted_ks_statistic(values, weights, cdf)?;
    let n = effective_sample_size(weights);
    Ok(TestReport::new(
        d,
        ks_p_value(d, n),
        vec![values.len(), n.floor() as usize],
        Criterion::StatisticBelow,
        max_distance,
    ))
}

/// Weight-proportional multinomial resample to an unweighted pseudo-sample of
/// the effective sample size.
pub fn resample_to_ess<R: Rng + ?Sized>(values: &[f64], weights: &[f64], rng: &mut R) -> Vec<f64> {
    let n = effective_sample_size(weights).round().max(1.0) as usize;
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            let k = cumulative.partition_point(|&c| c <= u).min(values.len() - 1);
            values[k]
        })
        .collect()
}

#[cfg(test)]
mod unit {
    use super::*;
    use crate::types::RngStream;

    #[test]
    fn unit_weights_reduce_to_plain_ks() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let d = weighted_ks_statistic(&x, &vec![1.0; 100], |u| u).unwrap();
        assert!((d - 0.005).abs() < 1e-12);
    }

    #[test]
    fn weights_shift_the_ecdf() {
        // weights 2x on a uniform grid reproduce the cdf x^2
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let w: Vec<f64> = x.iter().map(|u| 2.0 * u).collect();
        let d = weighted_ks_statistic(&x, &w, |u| u * u).unwrap();
        assert!(d < 1e-3, "{d}");
        assert!(weighted_ks_statistic(&x, &vec![1.0; n], |u| u * u).unwrap() > 0.2);
    }

    #[test]
    fn ess_and_resampling() {
        assert!((effective_sample_size(&[1.0; 50]) - 50.0).abs() < 1e-12);
        assert!((effective_sample_size(&[1.0, 0.0, 0.0]) - 1.0).abs() < 1e-12);
        let mut rng = RngStream::new(1, 2);
        let r = resample_to_ess(&[1.0, 2.0, 3.0], &[0.0, 1.0, 1.0], &mut rng);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|&v| v != 1.0));
    }

    #[test]
    fn empirical_power_sums() {
        let p = MassPartition::rank(&[0.5, 0.25]).unwrap();
        let e = WeightedEmpirical::from_partition(&p, 1.0, 0);
        assert!((e.power_sum(1.0) - 0.75).abs() < 1e-15);
        assert!((e.power_sum(2.0) - 0.3125).abs() < 1e-15);
        assert_eq!(e.largest_log(), Some(0.5f64.ln()));
    }
}
