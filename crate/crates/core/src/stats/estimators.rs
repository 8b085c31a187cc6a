//! Monte Carlo estimators of the limit theorems, over per-replica empirical
//! measures taken at a common time.

use serde::{Deserialize, Serialize};

use super::{StatsError, WeightedEmpirical};
use crate::analytic::KappaFunction;
use crate::laws::Estimate;
use crate::types::neumaier_sum;

pub const MIN_REPLICAS: usize = 2;

fn common_time(samples: &[WeightedEmpirical]) -> Result<f64, StatsError> {
    if samples.len() < MIN_REPLICAS {
        return Err(StatsError::InsufficientReplicas {
            needed: MIN_REPLICAS,
            got: samples.len(),
        });
    }
    let t = samples[0].time;
    if samples.iter().any(|s| s.time != t) {
        return Err(StatsError::Degenerate("samples taken at different times".into()));
    }
    Ok(t)
}

/// `Σ a_r / Σ b_r` with the delta-method standard error.
pub fn ratio_estimate(a: &[f64], b: &[f64]) -> Estimate {
    let n = a.len() as f64;
    let sb = neumaier_sum(b.iter().copied());
    let r = neumaier_sum(a.iter().copied()) / sb;
    let bbar = sb / n;
    let ss = neumaier_sum(a.iter().zip(b).map(|(x, y)| (x - r * y).powi(2)));
    Estimate {
        value: r,
        std_err: (ss / (n * (n - 1.0))).sqrt() / bbar,
    }
}

/// Pooled `Σ X^{p*} f(t⁻¹ ln X) / Σ X^{p*}` over replicas.
///
/// Normalising by the total weight removes the fluctuation of the
/// martingale itself; for conservative laws without screening the
/// denominator is exactly one per replica.
pub fn lln_functional(samples: &[WeightedEmpirical], p_star: f64, f: impl Fn(f64) -> f64) -> Result<Estimate, StatsError> {
    let t = common_time(samples)?;
    let a: Vec<f64> = samples.iter().map(|s| s.functional(p_star, |l| f(l / t))).collect();
    let b: Vec<f64> = samples.iter().map(|s| s.power_sum(p_star)).collect();
    Ok(ratio_estimate(&a, &b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltEstimate {
    pub mean: Estimate,
    pub variance: Estimate,
}

/// Weighted mean and variance of `(ln X + κ′(p*) t)/√t`.
pub fn clt_functional(samples: &[WeightedEmpirical], p_star: f64, kappa_prime: f64) -> Result<CltEstimate, StatsError> {
    let t = common_time(samples)?;
    let z = |l: f64| (l + kappa_prime * t) / t.sqrt();
    let b: Vec<f64> = samples.iter().map(|s| s.power_sum(p_star)).collect();
    let a1: Vec<f64> = samples.iter().map(|s| s.functional(p_star, z)).collect();
    let a2: Vec<f64> = samples.iter().map(|s| s.functional(p_star, |l| z(l).powi(2))).collect();
    let mean = ratio_estimate(&a1, &b);
    let second = ratio_estimate(&a2, &b);
    Ok(CltEstimate {
        mean,
        variance: Estimate {
            value: second.value - mean.value * mean.value,
            std_err: second.std_err,
        },
    })
}

/// Mean over replicas of `Σ X^{p*} (t^{1/α} X)^{αk}`.
pub fn scaled_moment(samples: &[WeightedEmpirical], p_star: f64, alpha: f64, k: u32) -> Result<Estimate, StatsError> {
    let t = common_time(samples)?;
    if alpha <= 0.0 {
        return Err(StatsError::Degenerate(format!("alpha = {alpha} must be positive")));
    }
    let ak = alpha * k as f64;
    let values: Vec<f64> = samples
        .iter()
        .map(|s| t.powf(k as f64) * s.power_sum(p_star + ak))
        .collect();
    Ok(Estimate::from_samples(&values))
}

/// Mean over replicas of `t⁻¹ ln X_1(t)`.
///
/// Refuses thresholds that could have screened the largest fragment:
/// `ln ε` must lie below `−κ′(p̄) t − 5`.
pub fn largest_rate(samples: &[WeightedEmpirical], kappa: &KappaFunction, epsilon: Option<f64>) -> Result<Estimate, StatsError> {
    let t = common_time(samples)?;
    let pb = kappa.p_bar()?;
    let rate = kappa.kappa_prime(pb)?;
    if let Some(eps) = epsilon {
        let bound = -rate * t - 5.0;
        if eps.ln() >= bound {
            return Err(StatsError::ThresholdTooLarge {
                log_epsilon: eps.ln(),
                bound,
            });
        }
    }
    let values = samples
        .iter()
        .map(|s| s.largest_log().map(|l| l / t).ok_or(StatsError::Degenerate("empty population".into())))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Estimate::from_samples(&values))
}

/// `M(p, t) = e^{tκ(p)} Σ w X^p(t)` for every sample.
pub fn additive_martingale(samples: &[WeightedEmpirical], p: f64, kappa: &KappaFunction) -> Result<Vec<f64>, StatsError> {
    let k = kappa.kappa(p)?;
    Ok(samples.iter().map(|s| (s.time * k).exp() * s.power_sum(p)).collect())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[cfg(test)]
mod unit {
    use super::*;
    use crate::laws::DislocationLaw;
    use crate::types::MassPartition;

    fn sample(sizes: &[f64], t: f64, r: u64) -> WeightedEmpirical {
        WeightedEmpirical::from_partition(&MassPartition::rank(sizes).unwrap(), t, r)
    }

    #[test]
    fn lln_with_constant_function_is_one() {
        let s = vec![sample(&[0.5, 0.3, 0.2], 2.0, 0), sample(&[0.9, 0.1], 2.0, 1)];
        let e = lln_functional(&s, 1.0, |_| 1.0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-15);
        assert!(e.std_err < 1e-15);
    }

    #[test]
    fn ratio_estimate_matches_hand_computation() {
        let e = ratio_estimate(&[1.0, 3.0], &[1.0, 1.0]);
        assert_eq!(e.value, 2.0);
        assert!((e.std_err - 1.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_guard() {
        let k = KappaFunction::without_erosion(DislocationLaw::uniform_binary());
        let s = vec![sample(&[0.5, 0.5], 30.0, 0), sample(&[0.6, 0.4], 30.0, 1)];
        assert!(matches!(largest_rate(&s, &k, Some(1e-3)), Err(StatsError::ThresholdTooLarge { .. })));
        let r = largest_rate(&s, &k, Some(1e-5)).unwrap();
        assert!(r.value <= 0.0);
    }

    #[test]
    fn martingale_bounds_the_largest_term() {
        let k = KappaFunction::without_erosion(DislocationLaw::uniform_binary());
        let s = vec![sample(&[0.5, 0.3, 0.2], 3.0, 0)];
        let m = additive_martingale(&s, 2.0, &k).unwrap();
        assert!((3.0f64 / 3.0).exp() * 0.25 <= m[0]);
    }

    #[test]
    fn mixed_times_and_tiny_inputs_are_refused() {
        assert!(matches!(
            lln_functional(&[sample(&[1.0], 1.0, 0)], 1.0, |x| x),
            Err(StatsError::InsufficientReplicas { .. })
        ));
        let s = vec![sample(&[1.0], 1.0, 0), sample(&[1.0], 2.0, 1)];
        assert!(lln_functional(&s, 1.0, |x| x).is_err());
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
    }
}
