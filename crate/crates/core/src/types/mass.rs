//! Ranked mass partitions stored as natural-log sizes.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the total mass of a partition (and on every "exact" mass check).
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MassError {
    #[error("entry {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("entry {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("total mass {total} exceeds 1 by more than the tolerance")]
    Overflow { total: f64 },
}

/// A ranked sequence of positive masses with total at most one.
///
/// Entries are stored as natural logarithms so that fragments of size
/// `e^-700` remain representable; zeros are represented by absence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MassPartition {
    log_sizes: Vec<f64>,
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn descending(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

impl MassPartition {
    /// The all-dust partition.
    pub fn empty() -> Self {
        Self::default()
    }

    /// The single unit fragment `(1, 0, ...)`.
    pub fn unit() -> Self {
        Self {
            log_sizes: vec![0.0],
        }
    }

    /// Decreasing rearrangement of a family of linear sizes.
    pub fn rank(raw: &[f64]) -> Result<Self, MassError> {
        let mut logs = Vec::with_capacity(raw.len());
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(MassError::NonFinite { index, value });
            }
            if value < 0.0 {
                return Err(MassError::Negative { index, value });
            }
            if value > 0.0 {
                logs.push(value.ln());
            }
        }
        logs.sort_by(descending);
        let out = Self { log_sizes: logs };
        out.check_mass()?;
        Ok(out)
    }

    /// Builds a partition from log sizes in any order; `-inf` entries are dust.
    pub fn from_log_sizes(mut logs: Vec<f64>) -> Result<Self, MassError> {
        for (index, &value) in logs.iter().enumerate() {
            if value.is_nan() || value == f64::INFINITY {
                return Err(MassError::NonFinite { index, value });
            }
        }
        logs.retain(|l| *l > f64::NEG_INFINITY);
        logs.sort_by(descending);
        let out = Self { log_sizes: logs };
        out.check_mass()?;
        Ok(out)
    }

    /// Builds from log sizes that the caller guarantees are finite; ranks but
    /// skips the mass check (used for weighted or rescaled populations).
    pub(crate) fn from_logs_unchecked(mut logs: Vec<f64>) -> Self {
        logs.sort_by(descending);
        Self { log_sizes: logs }
    }

    /// Drops `-inf` (zero-size) entries left at the tail by unchecked builders.
    pub(crate) fn without_dust_entries(mut self) -> Self {
        while self.log_sizes.last() == Some(&f64::NEG_INFINITY) {
            self.log_sizes.pop();
        }
        self
    }

    fn check_mass(&self) -> Result<(), MassError> {
        let total = self.total_mass();
        if total > 1.0 + MASS_TOLERANCE {
            return Err(MassError::Overflow { total });
        }
        Ok(())
    }

    /// Ranked union of several families.
    pub fn merge_families(families: &[MassPartition]) -> Result<Self, MassError> {
        let logs = families
            .iter()
            .flat_map(|f| f.log_sizes.iter().copied())
            .collect::<Vec<_>>();
        let mut logs = logs;
        logs.sort_by(descending);
        let out = Self { log_sizes: logs };
        out.check_mass()?;
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.log_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_sizes.is_empty()
    }

    pub fn log_sizes(&self) -> &[f64] {
        &self.log_sizes
    }

    pub fn into_log_sizes(self) -> Vec<f64> {
        self.log_sizes
    }

    /// Linear sizes in ranked order.
    pub fn sizes(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_sizes.iter().map(|l| l.exp())
    }

    /// `k`-th largest entry (1-based), zero past the end.
    pub fn get(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.log_sizes.get(k - 1).map_or(0.0, |l| l.exp())
    }

    pub fn largest_log(&self) -> Option<f64> {
        self.log_sizes.first().copied()
    }

    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.sizes())
    }

    /// `sum_i s_i^p` over positive entries.
    pub fn power_sum(&self, p: f64) -> f64 {
        neumaier_sum(self.log_sizes.iter().map(|l| (p * l).exp()))
    }

    /// Every entry multiplied by `exp(log_factor)`.
    pub fn scaled(&self, log_factor: f64) -> Self {
        Self {
            log_sizes: self.log_sizes.iter().map(|l| l + log_factor).collect(),
        }
    }

    /// True for the neutral configuration `(1, 0, ...)`.
    pub fn is_neutral(&self) -> bool {
        self.log_sizes.len() == 1 && self.log_sizes[0] >= 0.0
    }

    /// Mass lost to dust, `1 - sum_i s_i`, clamped at zero within tolerance.
    pub fn dust_mass(&self) -> f64 {
        let d = 1.0 - self.total_mass();
        if d < 0.0 && d >= -MASS_TOLERANCE {
            0.0
        } else {
            d.max(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &MassPartition, b: &[f64]) -> bool {
        a.len() == b.len() && a.sizes().zip(b).all(|(x, y)| (x - y).abs() < 1e-15)
    }

    #[test]
    fn rank_sorts_and_drops_zeros() {
        let p = MassPartition::rank(&[0.2, 0.5, 0.0, 0.3]).unwrap();
        assert!(close(&p, &[0.5, 0.3, 0.2]));
        assert!(MassPartition::rank(&[]).unwrap().is_empty());
        assert!(close(&MassPartition::rank(&[1.0]).unwrap(), &[1.0]));
    }

    #[test]
    fn rank_rejects_bad_entries() {
        assert!(matches!(
            MassPartition::rank(&[0.1, -0.2]),
            Err(MassError::Negative { index: 1, .. })
        ));
        assert!(matches!(
            MassPartition::rank(&[f64::NAN]),
            Err(MassError::NonFinite { .. })
        ));
        assert!(matches!(
            MassPartition::rank(&[0.7, 0.7]),
            Err(MassError::Overflow { .. })
        ));
    }

    #[test]
    fn merge_worked_example() {
        let a = MassPartition::rank(&[0.5]).unwrap();
        let b = MassPartition::rank(&[0.3, 0.2]).unwrap();
        assert!(close(
            &MassPartition::merge_families(&[a, b]).unwrap(),
            &[0.5, 0.3, 0.2]
        ));
        let a = MassPartition::rank(&[2.0 / 3.0, 1.0 / 12.0]).unwrap();
        let b = MassPartition::rank(&[3.0 / 16.0, 1.0 / 16.0]).unwrap();
        assert!(close(
            &MassPartition::merge_families(&[a, b]).unwrap(),
            &[2.0 / 3.0, 3.0 / 16.0, 1.0 / 12.0, 1.0 / 16.0]
        ));
        let e = MassPartition::merge_families(&[MassPartition::empty(), MassPartition::empty()]);
        assert!(e.unwrap().is_empty());
    }

    #[test]
    fn merge_overflow_is_an_error() {
        let a = MassPartition::rank(&[0.6]).unwrap();
        assert!(MassPartition::merge_families(&[a.clone(), a]).is_err());
    }

    #[test]
    fn dust_examples() {
        assert_eq!(MassPartition::unit().dust_mass(), 0.0);
        assert!((MassPartition::rank(&[0.5, 0.25]).unwrap().dust_mass() - 0.25).abs() < 1e-15);
        assert_eq!(MassPartition::empty().dust_mass(), 1.0);
    }

    fn raw_family() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, 0..12).prop_map(|v| {
            let s: f64 = v.iter().sum();
            if s > 1.0 {
                v.iter().map(|x| x / s * 0.999).collect()
            } else {
                v
            }
        })
    }

    proptest! {
        #[test]
        fn rank_is_idempotent(raw in raw_family()) {
            let p = MassPartition::rank(&raw).unwrap();
            let again = MassPartition::from_log_sizes(p.log_sizes().to_vec()).unwrap();
            prop_assert_eq!(&p, &again);
            prop_assert!(p.log_sizes().windows(2).all(|w| w[0] >= w[1]));
            prop_assert_eq!(p.len(), raw.iter().filter(|x| **x > 0.0).count());
        }

        #[test]
        fn merge_commutes_and_preserves_dust(a in raw_family(), b in raw_family()) {
            let pa = MassPartition::rank(&a.iter().map(|x| x / 2.0).collect::<Vec<_>>()).unwrap();
            let pb = MassPartition::rank(&b.iter().map(|x| x / 2.0).collect::<Vec<_>>()).unwrap();
            let ab = MassPartition::merge_families(&[pa.clone(), pb.clone()]).unwrap();
            let ba = MassPartition::merge_families(&[pb.clone(), pa.clone()]).unwrap();
            prop_assert_eq!(&ab, &ba);
            let expected = 1.0 - pa.total_mass() - pb.total_mass();
            prop_assert!((ab.dust_mass() - expected.max(0.0)).abs() < 1e-12);
        }
    }
}
