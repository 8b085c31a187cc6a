use rand::{Rng, RngCore};
use rand_distr::{Distribution, Gamma};
use serde_json::json;

use super::{Dislocation, LawMetadata};
use crate::numeric::quad;
use crate::numeric::special::{beta_reg, digamma, ln_gamma, trigamma};
use crate::types::MassPartition;

const QUAD_TOL: f64 = 1e-13;

/// Split at a uniform point: ratios `(max(V, 1-V), min(V, 1-V))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformBinary;

impl Dislocation for UniformBinary {
    fn name(&self) -> String {
        "uniform_binary".into()
    }

    fn metadata(&self) -> LawMetadata {
        LawMetadata {
            conservative: true,
            geometric: false,
            max_children: Some(2),
        }
    }

    fn sample_ratios(&self, rng: &mut dyn RngCore) -> MassPartition {
        let v: f64 = rng.random();
        MassPartition::from_logs_unchecked(vec![v.ln(), (-v).ln_1p()])
            .without_dust_entries()
    }

    fn sigma_moment_closed(&self, p: f64) -> Option<f64> {
        Some(2.0 / (p + 1.0))
    }

    fn sigma_moment_derivative(&self, p: f64, order: u32) -> Option<f64> {
        let q = p + 1.0;
        match order {
            1 => Some(-2.0 / (q * q)),
            2 => Some(4.0 / (q * q * q)),
            _ => None,
        }
    }

    fn truncated_moment(&self, p: f64, x: f64) -> Option<f64> {
        let x = x.clamp(0.0, 1.0);
        Some(2.0 * x.powf(p + 1.0) / (p + 1.0))
    }

    fn count_at_least(&self, y: f64) -> Option<f64> {
        Some(2.0 * (1.0 - y).clamp(0.0, 1.0))
    }

    fn exact_expectation(&self, g: &dyn Fn(&MassPartition) -> f64) -> Option<f64> {
        // symmetric in V <-> 1-V
        let q = quad::integrate(
            |v| {
                let s = MassPartition::from_logs_unchecked(vec![(-v).ln_1p(), v.ln()]);
                g(&s)
            },
            0.0,
            0.5,
            QUAD_TOL,
        );
        Some(2.0 * q.value)
    }
}

/// Deterministic split into `(r, 1 - r)`.
#[derive(Debug, Clone, Copy)]
pub struct DeterministicBinary {
    r: f64,
}

impl DeterministicBinary {
    pub fn new(r: f64) -> Option<Self> {
        (r > 0.0 && r < 1.0 && r.is_finite()).then_some(Self { r })
    }

    fn pieces(&self) -> [f64; 2] {
        [self.r, 1.0 - self.r]
    }

    fn ranked(&self) -> MassPartition {
        MassPartition::from_logs_unchecked(vec![self.r.ln(), (-self.r).ln_1p()])
    }
}

/// Whether `a / b` is within `1e-9` of a rational with denominator at most 1000.
fn nearly_rational(x: f64) -> bool {
    let mut value = x;
    let (mut h0, mut h1) = (0.0f64, 1.0f64);
    let (mut k0, mut k1) = (1.0f64, 0.0f64);
    for _ in 0..32 {
        let a = value.floor();
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > 1000.0 {
            return false;
        }
        if (h2 / k2 - x).abs() < 1e-9 {
            return true;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = value - a;
        if frac.abs() < 1e-15 {
            return true;
        }
        value = 1.0 / frac;
    }
    false
}

impl Dislocation for DeterministicBinary {
    fn name(&self) -> String {
        "deterministic_binary".into()
    }

    fn params(&self) -> serde_json::Value {
        json!({ "r": self.r })
    }

    fn metadata(&self) -> LawMetadata {
        // geometric iff both pieces are integer powers of a common base
        let [a, b] = self.pieces();
        LawMetadata {
            conservative: true,
            geometric: nearly_rational(a.ln() / b.ln()),
            max_children: Some(2),
        }
    }

    fn sample_ratios(&self, _rng: &mut dyn RngCore) -> MassPartition {
        self.ranked()
    }

    fn sigma_moment_closed(&self, p: f64) -> Option<f64> {
        Some(self.pieces().iter().map(|s| s.powf(p)).sum())
    }

    fn sigma_moment_derivative(&self, p: f64, order: u32) -> Option<f64> {
        Some(
            self.pieces()
                .iter()
                .map(|s| s.powf(p) * s.ln().powi(order as i32))
                .sum(),
        )
    }

    fn truncated_moment(&self, p: f64, x: f64) -> Option<f64> {
        Some(self.pieces().iter().filter(|&&s| s < x).map(|s| s.powf(p)).sum())
    }

    fn count_at_least(&self, y: f64) -> Option<f64> {
        Some(self.pieces().iter().filter(|&&s| s >= y).count() as f64)
    }

    fn exact_expectation(&self, g: &dyn Fn(&MassPartition) -> f64) -> Option<f64> {
        Some(g(&self.ranked()))
    }
}

/// Two equal pieces `(U/2, U/2)`; loses mass `1 - U` at every split.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossyBinary;

impl Dislocation for LossyBinary {
    fn name(&self) -> String {
        "lossy_binary".into()
    }

    fn metadata(&self) -> LawMetadata {
        LawMetadata {
            conservative: false,
            geometric: false,
            max_children: Some(2),
        }
    }

    fn sample_ratios(&self, rng: &mut dyn RngCore) -> MassPartition {
        let u: f64 = rng.random();
        let l = u.ln() - std::f64::consts::LN_2;
        MassPartition::from_logs_unchecked(vec![l, l]).without_dust_entries()
    }

    fn sigma_moment_closed(&self, p: f64) -> Option<f64> {
        Some((1.0 - p).exp2() / (p + 1.0))
    }

    fn sigma_moment_derivative(&self, p: f64, order: u32) -> Option<f64> {
        let h = 1.0 / (p + 1.0);
        let l2 = std::f64::consts::LN_2;
        let base = (1.0 - p).exp2();
        match order {
            1 => Some(-base * (l2 * h + h * h)),
            2 => Some(base * (l2 * l2 * h + 2.0 * l2 * h * h + 2.0 * h * h * h)),
            _ => None,
        }
    }

    fn truncated_moment(&self, p: f64, x: f64) -> Option<f64> {
        let m = x.clamp(0.0, 0.5);
        Some(4.0 * m.powf(p + 1.0) / (p + 1.0))
    }

    fn count_at_least(&self, y: f64) -> Option<f64> {
        Some(2.0 * (1.0 - 2.0 * y).clamp(0.0, 1.0))
    }

    fn exact_expectation(&self, g: &dyn Fn(&MassPartition) -> f64) -> Option<f64> {
        let q = quad::integrate(
            |u| {
                let l = u.ln() - std::f64::consts::LN_2;
                g(&MassPartition::from_logs_unchecked(vec![l, l]))
            },
            0.0,
            1.0,
            QUAD_TOL,
        );
        Some(q.value)
    }
}

/// Conservative `k`-ary split with symmetric Dirichlet(`a`, ..., `a`) ratios.
#[derive(Debug, Clone, Copy)]
pub struct DirichletSplit {
    k: usize,
    a: f64,
}

impl DirichletSplit {
    pub fn new(k: usize, a: f64) -> Option<Self> {
        (k >= 2 && a > 0.0 && a.is_finite()).then_some(Self { k, a })
    }

    fn rest(&self) -> f64 {
        (self.k as f64 - 1.0) * self.a
    }

    fn single_moment(&self, p: f64) -> f64 {
        let ka = self.k as f64 * self.a;
        (ln_gamma(self.a + p) - ln_gamma(self.a) + ln_gamma(ka) - ln_gamma(ka + p)).exp()
    }
}

impl Dislocation for DirichletSplit {
    fn name(&self) -> String {
        "dirichlet".into()
    }

    fn params(&self) -> serde_json::Value {
        json!({ "k": self.k, "a": self.a })
    }

    fn metadata(&self) -> LawMetadata {
        LawMetadata {
            conservative: true,
            geometric: false,
            max_children: Some(self.k),
        }
    }

    fn sample_ratios(&self, rng: &mut dyn RngCore) -> MassPartition {
        let gamma = Gamma::new(self.a, 1.0).expect("validated shape");
        let draws: Vec<f64> = (0..self.k).map(|_| gamma.sample(rng)).collect();
        let log_total = crate::types::neumaier_sum(draws.iter().copied()).ln();
        MassPartition::from_logs_unchecked(draws.iter().map(|g| g.ln() - log_total).collect())
            .without_dust_entries()
    }

    fn sigma_moment_closed(&self, p: f64) -> Option<f64> {
        Some(self.k as f64 * self.single_moment(p))
    }

    fn sigma_moment_derivative(&self, p: f64, order: u32) -> Option<f64> {
        let ka = self.k as f64 * self.a;
        let m = self.k as f64 * self.single_moment(p);
        let d = digamma(self.a + p) - digamma(ka + p);
        match order {
            1 => Some(m * d),
            2 => Some(m * (d * d + trigamma(self.a + p) - trigamma(ka + p))),
            _ => None,
        }
    }

    fn truncated_moment(&self, p: f64, x: f64) -> Option<f64> {
        let x = x.clamp(0.0, 1.0);
        let m = self.k as f64 * self.single_moment(p);
        Some(m * beta_reg(self.a + p, self.rest(), x))
    }

    fn count_at_least(&self, y: f64) -> Option<f64> {
        let y = y.clamp(0.0, 1.0);
        Some(self.k as f64 * (1.0 - beta_reg(self.a, self.rest(), y)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::RngStream;

    #[test]
    fn rational_detection() {
        assert!(nearly_rational(1.0));
        assert!(nearly_rational(2.0));
        assert!(nearly_rational(3.0 / 7.0));
        assert!(!nearly_rational(std::f64::consts::PI));
        assert!(!nearly_rational((0.3f64).ln() / (0.7f64).ln()));
    }

    #[test]
    fn golden_split_is_geometric() {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        assert!(DeterministicBinary::new(r).unwrap().metadata().geometric);
        assert!(DeterministicBinary::new(0.5).unwrap().metadata().geometric);
        assert!(!DeterministicBinary::new(0.3).unwrap().metadata().geometric);
    }

    #[test]
    fn dirichlet_moments_match_rational_products() {
        // E[s^n] for Beta(a, b) is prod_{j<n} (a+j)/(a+b+j)
        let d = DirichletSplit::new(3, 0.7).unwrap();
        for n in 1..=3 {
            let (a, b) = (0.7, 1.4);
            let prod: f64 = (0..n).map(|j| (a + j as f64) / (a + b + j as f64)).product();
            let got = d.sigma_moment_closed(n as f64).unwrap();
            assert!((got - 3.0 * prod).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn dirichlet_samples_are_conservative() {
        let d = DirichletSplit::new(4, 0.5).unwrap();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..1000 {
            let s = d.sample_ratios(&mut rng);
            assert!((s.total_mass() - 1.0).abs() < 1e-12);
            assert!(s.len() <= 4);
        }
    }

    #[test]
    fn derivative_formulas_match_finite_differences() {
        let laws: Vec<Box<dyn Dislocation>> = vec![
            Box::new(UniformBinary),
            Box::new(LossyBinary),
            Box::new(DeterministicBinary::new(0.3).unwrap()),
            Box::new(DirichletSplit::new(3, 1.5).unwrap()),
        ];
        for law in laws {
            for &p in &[0.7, 1.0, 2.5] {
                let h = 1e-4;
                let f = |q: f64| law.sigma_moment_closed(q).unwrap();
                let d1 = (f(p + h) - f(p - h)) / (2.0 * h);
                let d2 = (f(p + h) - 2.0 * f(p) + f(p - h)) / (h * h);
                assert!((d1 - law.sigma_moment_derivative(p, 1).unwrap()).abs() < 1e-7);
                assert!((d2 - law.sigma_moment_derivative(p, 2).unwrap()).abs() < 1e-4);
            }
        }
    }
}
