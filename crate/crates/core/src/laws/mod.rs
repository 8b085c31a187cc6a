//! Dislocation laws: samplers for the ratios of children to parent sizes,
//! with closed-form moment functionals for the built-in laws.

mod builtin;

use std::fmt;
use std::sync::{Arc, OnceLock};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builtin::{DeterministicBinary, DirichletSplit, LossyBinary, UniformBinary};

use crate::types::{neumaier_sum, MassPartition, RngStream};

/// Draws kept for Monte Carlo functionals of laws without a closed form.
pub const MC_POOL_SIZE: usize = 1 << 17;
const MC_POOL_SEED: u64 = 0x00c0_ffee_d15e_a5e5;
const MAX_NEUTRAL_REDRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("unknown dislocation law `{0}`")]
    UnknownLaw(String),
    #[error("invalid parameter `{param}` for law `{law}`: {reason}")]
    InvalidParameter {
        law: String,
        param: String,
        reason: String,
    },
    #[error("moment diverges: p = {p} is not above the critical exponent {underline_p}")]
    Divergent { p: f64, underline_p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LawMetadata {
    /// Every dislocation preserves total mass.
    pub conservative: bool,
    /// All ratios lie on the powers of a single `r`.
    pub geometric: bool,
    /// Upper bound on the number of children, `None` when unbounded.
    pub max_children: Option<usize>,
}

/// A value with its Monte Carlo standard error (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_err: 0.0,
        }
    }

    /// Sample mean and standard error of the mean.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = neumaier_sum(xs.iter().copied()) / n;
        let var = if xs.len() > 1 {
            neumaier_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            std_err: (var / n).sqrt(),
        }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_err == 0.0 {
            if self.value == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - target) / self.std_err
        }
    }
}

/// The behaviour a dislocation law has to provide.
///
/// Only `sample_ratios` and `metadata` are mandatory; the closed-form hooks
/// let analytic quantities skip Monte Carlo.
pub trait Dislocation: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn params(&self) -> serde_json::Value {
        serde_json::json!({})
    }

    fn metadata(&self) -> LawMetadata;

    /// `inf { p > 0 : E sum s_i^p < inf }`.
    fn underline_p(&self) -> f64 {
        0.0
    }

    /// One draw of ranked ratios. May return the neutral configuration; the
    /// caller redraws.
    fn sample_ratios(&self, rng: &mut dyn RngCore) -> MassPartition;

    /// `E sum s_i^p`.
    fn sigma_moment_closed(&self, _p: f64) -> Option<f64> {
        None
    }

    /// Derivative of `E sum s_i^p` in `p` of the given order (1 or 2).
    fn sigma_moment_derivative(&self, _p: f64, _order: u32) -> Option<f64> {
        None
    }

    /// `E sum_i 1{s_i < x} s_i^p`.
    fn truncated_moment(&self, _p: f64, _x: f64) -> Option<f64> {
        None
    }

    /// `E #{i : s_i >= y}`.
    fn count_at_least(&self, _y: f64) -> Option<f64> {
        None
    }

    /// `E g(s)` computed without sampling.
    fn exact_expectation(&self, _g: &dyn Fn(&MassPartition) -> f64) -> Option<f64> {
        None
    }
}

/// Deterministic erosion: every fragment decays at rate `c`, `X(t) = e^{-ct} Y(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErosionParams {
    pub c: f64,
}

impl ErosionParams {
    pub fn none() -> Self {
        Self { c: 0.0 }
    }

    pub fn new(c: f64) -> Result<Self, LawError> {
        if c.is_finite() && c >= 0.0 {
            Ok(Self { c })
        } else {
            Err(LawError::InvalidParameter {
                law: "erosion".into(),
                param: "c".into(),
                reason: format!("{c} is not a nonnegative real"),
            })
        }
    }

    pub fn is_none(&self) -> bool {
        self.c == 0.0
    }
}

/// Law name and parameters as they appear in JSON configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

struct LawInner {
    law: Box<dyn Dislocation>,
    pool: OnceLock<Vec<MassPartition>>,
}

/// Shared handle on a dislocation law.
#[derive(Clone)]
pub struct DislocationLaw(Arc<LawInner>);

impl fmt::Debug for DislocationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DislocationLaw")
            .field("name", &self.name())
            .field("params", &self.0.law.params())
            .finish()
    }
}

fn param_f64(spec: &LawSpec, key: &str) -> Result<f64, LawError> {
    spec.params
        .get(key)
        .and_then(|v| v.as_f64())
        .ok_or_else(|| LawError::InvalidParameter {
            law: spec.name.clone(),
            param: key.into(),
            reason: "missing or not a number".into(),
        })
}

impl DislocationLaw {
    pub fn new<D: Dislocation + 'static>(law: D) -> Self {
        Self(Arc::new(LawInner {
            law: Box::new(law),
            pool: OnceLock::new(),
        }))
    }

    pub fn uniform_binary() -> Self {
        Self::new(UniformBinary)
    }

    pub fn lossy_binary() -> Self {
        Self::new(LossyBinary)
    }

    pub fn deterministic_binary(r: f64) -> Result<Self, LawError> {
        DeterministicBinary::new(r)
            .map(Self::new)
            .ok_or_else(|| LawError::InvalidParameter {
                law: "deterministic_binary".into(),
                param: "r".into(),
                reason: format!("{r} is not in (0, 1)"),
            })
    }

    pub fn dirichlet(k: usize, a: f64) -> Result<Self, LawError> {
        DirichletSplit::new(k, a)
            .map(Self::new)
            .ok_or_else(|| LawError::InvalidParameter {
                law: "dirichlet".into(),
                param: "k, a".into(),
                reason: format!("need k >= 2 and a > 0, got k = {k}, a = {a}"),
            })
    }

    pub fn from_spec(spec: &LawSpec) -> Result<Self, LawError> {
        match spec.name.as_str() {
            "uniform_binary" => Ok(Self::uniform_binary()),
            "lossy_binary" => Ok(Self::lossy_binary()),
            "deterministic_binary" => Self::deterministic_binary(param_f64(spec, "r")?),
            "dirichlet" | "dirichlet_k" => {
                let k = param_f64(spec, "k")?;
                if k.fract() != 0.0 || k < 2.0 {
                    return Err(LawError::InvalidParameter {
                        law: spec.name.clone(),
                        param: "k".into(),
                        reason: "must be an integer >= 2".into(),
                    });
                }
                let a = spec.params.get("a").and_then(|v| v.as_f64()).unwrap_or(1.0);
                Self::dirichlet(k as usize, a)
            }
            other => Err(LawError::UnknownLaw(other.into())),
        }
    }

    pub fn spec(&self) -> LawSpec {
        let params = match self.0.law.params() {
            serde_json::Value::Object(m) => m,
            _ => Default::default(),
        };
        LawSpec {
            name: self.name(),
            params,
        }
    }

    pub fn name(&self) -> String {
        self.0.law.name()
    }

    pub fn metadata(&self) -> LawMetadata {
        self.0.law.metadata()
    }

    pub fn underline_p(&self) -> f64 {
        self.0.law.underline_p()
    }

    pub fn inner(&self) -> &dyn Dislocation {
        self.0.law.as_ref()
    }

    /// One draw from the law; the neutral configuration is rejected and redrawn.
    ///
    /// # Panics
    /// If a user law returns the neutral configuration 10 000 times in a row.
    pub fn sample(&self, rng: &mut dyn RngCore) -> MassPartition {
        for _ in 0..MAX_NEUTRAL_REDRAWS {
            let s = self.0.law.sample_ratios(rng);
            if !s.is_neutral() {
                return s;
            }
        }
        panic!("law `{}` keeps producing the neutral configuration", self.name());
    }

    /// Fixed pool of draws used for every Monte Carlo functional of this law,
    /// so that functionals at different `p` share common random numbers.
    pub fn mc_pool(&self) -> &[MassPartition] {
        self.0.pool.get_or_init(|| {
            let mut rng = RngStream::new(MC_POOL_SEED, 0);
            (0..MC_POOL_SIZE).map(|_| self.sample(&mut rng)).collect()
        })
    }

    /// `E g(s)`: exact where the law supports it, otherwise Monte Carlo over the pool.
    pub fn expectation(&self, g: &dyn Fn(&MassPartition) -> f64) -> Estimate {
        if let Some(v) = self.0.law.exact_expectation(g) {
            return Estimate::exact(v);
        }
        let values: Vec<f64> = self.mc_pool().iter().map(g).collect();
        Estimate::from_samples(&values)
    }

    /// `E sum_i s_i^p`.
    pub fn sigma_moment(&self, p: f64) -> Result<Estimate, LawError> {
        let underline_p = self.underline_p();
        if p <= underline_p {
            return Err(LawError::Divergent { p, underline_p });
        }
        if p == 1.0 && self.metadata().conservative {
            return Ok(Estimate::exact(1.0));
        }
        if let Some(v) = self.0.law.sigma_moment_closed(p) {
            return Ok(Estimate::exact(v));
        }
        Ok(self.expectation(&|s| s.power_sum(p)))
    }

    pub fn has_closed_form(&self) -> bool {
        self.0.law.sigma_moment_closed(1.0).is_some()
    }

    /// `E sum_i 1{s_i < x} s_i^p`.
    pub fn truncated_moment(&self, p: f64, x: f64) -> Estimate {
        if let Some(v) = self.0.law.truncated_moment(p, x) {
            return Estimate::exact(v);
        }
        let lx = x.ln();
        self.expectation(&move |s| {
            neumaier_sum(s.log_sizes().iter().filter(|&&l| l < lx).map(|l| (p * l).exp()))
        })
    }

    /// `E #{i : s_i >= y}`.
    pub fn count_at_least(&self, y: f64) -> Estimate {
        if let Some(v) = self.0.law.count_at_least(y) {
            return Estimate::exact(v);
        }
        let ly = y.ln();
        self.expectation(&move |s| s.log_sizes().iter().filter(|&&l| l >= ly).count() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Three pieces from two uniform cuts; no closed forms, exercises the
    /// Monte Carlo path.
    #[derive(Debug)]
    struct StickThree;

    impl Dislocation for StickThree {
        fn name(&self) -> String {
            "stick_three".into()
        }
        fn metadata(&self) -> LawMetadata {
            LawMetadata {
                conservative: true,
                geometric: false,
                max_children: Some(3),
            }
        }
        fn sample_ratios(&self, rng: &mut dyn RngCore) -> MassPartition {
            let (a, b): (f64, f64) = (rng.random(), rng.random());
            let (lo, hi) = (a.min(b), a.max(b));
            MassPartition::rank(&[lo, hi - lo, 1.0 - hi]).unwrap()
        }
    }

    fn builtins() -> Vec<DislocationLaw> {
        vec![
            DislocationLaw::uniform_binary(),
            DislocationLaw::deterministic_binary(0.5).unwrap(),
            DislocationLaw::deterministic_binary(0.3).unwrap(),
            DislocationLaw::lossy_binary(),
            DislocationLaw::dirichlet(3, 1.0).unwrap(),
        ]
    }

    #[test]
    fn uniform_binary_pieces() {
        let law = DislocationLaw::uniform_binary();
        let mut rng = RngStream::new(1, 1);
        for _ in 0..1000 {
            let s = law.sample(&mut rng);
            assert_eq!(s.len(), 2);
            assert!(s.get(1) >= 0.5 && s.get(1) <= 1.0);
            assert!((s.total_mass() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_half() {
        let law = DislocationLaw::deterministic_binary(0.5).unwrap();
        let mut rng = RngStream::new(1, 1);
        let s = law.sample(&mut rng);
        assert_eq!(s.sizes().collect::<Vec<_>>(), vec![0.5, 0.5]);
        assert!(law.metadata().geometric);
        assert!(!DislocationLaw::uniform_binary().metadata().geometric);
        assert!(!DislocationLaw::lossy_binary().metadata().geometric);
    }

    #[test]
    fn lossy_binary_defect() {
        let law = DislocationLaw::lossy_binary();
        let mut rng = RngStream::new(9, 0);
        for _ in 0..1000 {
            let s = law.sample(&mut rng);
            assert_eq!(s.len(), 2);
            assert_eq!(s.log_sizes()[0], s.log_sizes()[1]);
            assert!(s.total_mass() < 1.0);
        }
    }

    #[test]
    fn sigma_moment_examples() {
        let u = DislocationLaw::uniform_binary();
        assert!((u.sigma_moment(2.0).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
        let d = DislocationLaw::deterministic_binary(0.5).unwrap();
        assert!((d.sigma_moment(2.0).unwrap().value - 0.5).abs() < 1e-15);
        for law in builtins().into_iter().filter(|l| l.metadata().conservative) {
            assert!((law.sigma_moment(1.0).unwrap().value - 1.0).abs() < 1e-12);
        }
        assert!(matches!(u.sigma_moment(0.0), Err(LawError::Divergent { .. })));
        assert_eq!(DislocationLaw::new(StickThree).sigma_moment(1.0).unwrap().value, 1.0);
    }

    #[test]
    fn sigma_moment_by_quadrature_route() {
        // the exact-expectation route is independent of the closed form
        for law in [DislocationLaw::uniform_binary(), DislocationLaw::lossy_binary()] {
            for &p in &[0.5, 1.0, 2.0, 3.0] {
                let closed = law.sigma_moment(p).unwrap().value;
                let quad = law.inner().exact_expectation(&|s| s.power_sum(p)).unwrap();
                assert!((closed - quad).abs() < 1e-11, "{} p={p}", law.name());
            }
        }
    }

    #[test]
    fn empirical_moments_within_four_standard_errors() {
        let mut rng = RngStream::new(2024, 3);
        for law in builtins() {
            let draws: Vec<MassPartition> = (0..100_000).map(|_| law.sample(&mut rng)).collect();
            for &p in &[1.0, 2.0, 3.0] {
                let xs: Vec<f64> = draws.iter().map(|s| s.power_sum(p)).collect();
                let est = Estimate::from_samples(&xs);
                let exact = law.sigma_moment(p).unwrap().value;
                if est.std_err < 1e-12 {
                    assert!((est.value - exact).abs() < 1e-12);
                } else {
                    assert!(est.z_score(exact).abs() < 4.0, "{} p={p} {est:?} vs {exact}", law.name());
                }
            }
        }
    }

    #[test]
    fn monte_carlo_moment_for_user_law() {
        // E sum s^2 for three uniform spacings is 3 * 2/12 = 1/2
        let law = DislocationLaw::new(StickThree);
        let est = law.sigma_moment(2.0).unwrap();
        assert!(est.std_err > 0.0);
        assert!(est.z_score(0.5).abs() < 4.0, "{est:?}");
    }

    #[test]
    fn spec_round_trip_and_errors() {
        let spec: LawSpec =
            serde_json::from_str(r#"{"name": "deterministic_binary", "params": {"r": 0.25}}"#).unwrap();
        let law = DislocationLaw::from_spec(&spec).unwrap();
        assert_eq!(law.spec(), spec);
        let bad = LawSpec {
            name: "nope".into(),
            params: Default::default(),
        };
        assert_eq!(DislocationLaw::from_spec(&bad).unwrap_err(), LawError::UnknownLaw("nope".into()));
        assert!(DislocationLaw::deterministic_binary(1.0).is_err());
        let k3: LawSpec = serde_json::from_str(r#"{"name": "dirichlet", "params": {"k": 3}}"#).unwrap();
        assert_eq!(DislocationLaw::from_spec(&k3).unwrap().metadata().max_children, Some(3));
    }

    #[derive(Debug)]
    struct SometimesNeutral;

    impl Dislocation for SometimesNeutral {
        fn name(&self) -> String {
            "sometimes_neutral".into()
        }
        fn metadata(&self) -> LawMetadata {
            LawMetadata {
                conservative: true,
                geometric: false,
                max_children: Some(2),
            }
        }
        fn sample_ratios(&self, rng: &mut dyn RngCore) -> MassPartition {
            if rng.random::<f64>() < 0.5 {
                MassPartition::unit()
            } else {
                MassPartition::rank(&[0.6, 0.4]).unwrap()
            }
        }
    }

    #[test]
    fn neutral_draws_are_rejected() {
        let law = DislocationLaw::new(SometimesNeutral);
        let mut rng = RngStream::new(5, 5);
        for _ in 0..200 {
            assert_eq!(law.sample(&mut rng).len(), 2);
        }
    }
}
