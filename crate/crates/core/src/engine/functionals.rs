use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::sim::{run_with, Fragment, Observer};
use super::{EngineError, Screening, SimConfig};
use crate::analytic::KappaFunction;
use crate::laws::{DislocationLaw, Estimate};
use crate::types::{neumaier_sum, MassPartition};

/// Cost `ξ^β φ(ratios)` charged at every dislocation of a fragment of size `ξ`.
#[derive(Clone)]
pub struct CostSpec {
    phi: Arc<dyn Fn(&MassPartition) -> f64 + Send + Sync>,
    pub beta: f64,
    unit: bool,
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostSpec")
            .field("beta", &self.beta)
            .field("phi", &if self.unit { "1" } else { "user" })
            .finish()
    }
}

impl CostSpec {
    /// `φ ≡ 1`: counts dislocations, weighted by `ξ^β`.
    pub fn unit(beta: f64) -> Self {
        Self {
            phi: Arc::new(|_| 1.0),
            beta,
            unit: true,
        }
    }

    pub fn new<F>(beta: f64, phi: F) -> Self
    where
        F: Fn(&MassPartition) -> f64 + Send + Sync + 'static,
    {
        Self {
            phi: Arc::new(phi),
            beta,
            unit: false,
        }
    }

    pub fn phi(&self, ratios: &MassPartition) -> f64 {
        (self.phi)(ratios)
    }

    pub(crate) fn term(&self, parent_log_size: f64, ratios: &MassPartition) -> f64 {
        (self.beta * parent_log_size).exp() * self.phi(ratios)
    }

    /// `∫ |φ| dν`, exactly for `φ ≡ 1`, otherwise by the law's expectation.
    pub fn integral_abs(&self, law: &DislocationLaw) -> Estimate {
        if self.unit {
            Estimate::exact(1.0)
        } else {
            law.expectation(&|s| self.phi(s).abs())
        }
    }

    pub fn integral(&self, law: &DislocationLaw) -> Estimate {
        if self.unit {
            Estimate::exact(1.0)
        } else {
            law.expectation(&|s| self.phi(s))
        }
    }
}

fn genealogy_config(cfg: &SimConfig, epsilon: f64) -> SimConfig {
    let mut g = cfg.clone();
    g.alpha = 0.0;
    g.erosion = crate::laws::ErosionParams::none();
    g.screening = Screening::Threshold { epsilon };
    g.horizon = f64::INFINITY;
    g.snapshot_times.clear();
    g
}

struct EnergyMeter<'a> {
    cost: &'a CostSpec,
    terms: Vec<f64>,
}

impl Observer for EnergyMeter<'_> {
    fn on_split(&mut self, _time: f64, parent: &Fragment, ratios: &MassPartition) {
        self.terms.push(self.cost.term(parent.log_size, ratios));
    }
}

/// `ℰ(ε) = Σ_u 1{ξ_u > ε} ξ_u^β φ(ratios at u)` for one replica.
///
/// Depends only on the genealogy, so it is computed on a homogeneous run
/// screened at `ε` and continued until every fragment is below the screen.
pub fn energy_cost(cfg: &SimConfig, cost: &CostSpec, epsilon: f64, replica: u64) -> Result<f64, EngineError> {
    if epsilon >= 1.0 {
        return Ok(0.0);
    }
    if !(epsilon > 0.0) {
        return Err(EngineError::InvalidConfig(format!("epsilon = {epsilon} must be positive")));
    }
    let g = genealogy_config(cfg, epsilon);
    let mut meter = EnergyMeter {
        cost,
        terms: Vec::new(),
    };
    run_with(&g, replica, &mut meter)?;
    Ok(neumaier_sum(meter.terms))
}

pub fn energy_costs(cfg: &SimConfig, cost: &CostSpec, epsilon: f64) -> Result<Vec<f64>, EngineError> {
    crate::par::try_map_replicas(cfg.replicas, |r| energy_cost(cfg, cost, epsilon, r as u64))
}

/// Weighted first-passage sample below a screen `ε`: atoms `ξ_u/ε` with
/// weights `ξ_u^{p*}`, over nodes whose parent is above the screen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSample {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ExitSample {
    pub fn total_weight(&self) -> f64 {
        neumaier_sum(self.weights.iter().copied())
    }

    /// Weights divided by their total, for comparison with the limit law.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let total = self.total_weight();
        self.weights.iter().map(|w| w / total).collect()
    }
}

struct ExitCollector {
    log_eps: f64,
    p_star: f64,
    sample: ExitSample,
}

impl Observer for ExitCollector {
    fn on_screened(&mut self, _time: f64, _parent: &Fragment, child_log_size: f64) {
        self.sample.atoms.push((child_log_size - self.log_eps).exp());
        self.sample.weights.push((self.p_star * child_log_size).exp());
    }
}

/// First-passage sample of one replica.
pub fn exit_samples(cfg: &SimConfig, epsilon: f64, replica: u64) -> Result<ExitSample, EngineError> {
    if cfg.erosion.c != 0.0 {
        return Err(EngineError::Precondition("exit samples need c = 0".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(EngineError::InvalidConfig(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let p_star = KappaFunction::without_erosion(cfg.law.clone()).malthusian()?;
    let mut col = ExitCollector {
        log_eps: epsilon.ln(),
        p_star,
        sample: ExitSample {
            atoms: Vec::new(),
            weights: Vec::new(),
        },
    };
    run_with(&genealogy_config(cfg, epsilon), replica, &mut col)?;
    Ok(col.sample)
}

/// Outcome of a run started to observe shattering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtinctionOutcome {
    Extinct { time: f64, first_event: f64 },
    Survived { horizon: f64, live: usize },
}

impl ExtinctionOutcome {
    pub fn time(&self) -> Option<f64> {
        match *self {
            ExtinctionOutcome::Extinct { time, .. } => Some(time),
            ExtinctionOutcome::Survived { .. } => None,
        }
    }
}

#[derive(Default)]
struct FirstSplit(Option<f64>);

impl Observer for FirstSplit {
    fn on_split(&mut self, time: f64, _p: &Fragment, _r: &MassPartition) {
        self.0.get_or_insert(time);
    }
}

/// Time at which the screened population of one replica dies out.
pub fn extinction_time(cfg: &SimConfig, replica: u64) -> Result<ExtinctionOutcome, EngineError> {
    if cfg.alpha >= 0.0 {
        return Err(EngineError::Precondition(format!(
            "extinction needs alpha < 0, got {}",
            cfg.alpha
        )));
    }
    if !matches!(cfg.screening, Screening::Threshold { .. }) {
        return Err(EngineError::Precondition("extinction needs threshold mode".into()));
    }
    let mut first = FirstSplit::default();
    let s = run_with(cfg, replica, &mut first)?;
    Ok(match s.extinction_time {
        Some(time) => ExtinctionOutcome::Extinct {
            time,
            first_event: first.0.unwrap_or(time),
        },
        None => ExtinctionOutcome::Survived {
            horizon: cfg.horizon,
            live: s.live_at_end,
        },
    })
}

/// A function of fragment size with a declared neighbourhood of 0 on which it
/// takes its neutral value (0 for additive, 1 for multiplicative functionals).
#[derive(Clone)]
pub struct SizeFunctional {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub cutoff: f64,
}

impl fmt::Debug for SizeFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SizeFunctional").field("cutoff", &self.cutoff).finish()
    }
}

impl SizeFunctional {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(cutoff: f64, f: F) -> Self {
        Self {
            f: Arc::new(f),
            cutoff,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn check_neutral(&self, neutral: f64) -> Result<(), EngineError> {
        let probes = std::iter::once(0.0).chain((1..=16).map(|k| self.cutoff * k as f64 / 16.0));
        for y in probes {
            if (self.eval(y) - neutral).abs() > 1e-15 {
                return Err(EngineError::CutoffViolation(format!(
                    "f({y}) = {} differs from {neutral} inside the cutoff {}",
                    self.eval(y),
                    self.cutoff
                )));
            }
        }
        Ok(())
    }
}

/// Generator of the additive functional `Σ f(x_i)` at `x`:
/// `Σ_i x_i^α ∫ (Σ_j f(x_i s_j) − f(x_i)) ν(ds)`.
pub fn generator_additive(
    law: &DislocationLaw,
    x: &MassPartition,
    f: &SizeFunctional,
    alpha: f64,
) -> Result<Estimate, EngineError> {
    f.check_neutral(0.0)?;
    let mut value = 0.0;
    let mut var = 0.0;
    for &l in x.log_sizes() {
        let xi = l.exp();
        let e = law.expectation(&|s| neumaier_sum(s.sizes().map(|r| f.eval(xi * r))) - f.eval(xi));
        let scale = (alpha * l).exp();
        value += scale * e.value;
        var += (scale * e.std_err).powi(2);
    }
    Ok(Estimate {
        value,
        std_err: var.sqrt(),
    })
}

/// Generator of the multiplicative functional `Π g(x_i)` at `x`:
/// `Σ_i x_i^α ∫ (Π_j g(x_i s_j) − g(x_i)) ν(ds) · Π_{k≠i} g(x_k)`.
pub fn generator_multiplicative(
    law: &DislocationLaw,
    x: &MassPartition,
    g: &SizeFunctional,
    alpha: f64,
) -> Result<Estimate, EngineError> {
    g.check_neutral(1.0)?;
    let sizes: Vec<f64> = x.sizes().collect();
    let mut value = 0.0;
    let mut var = 0.0;
    for (i, &xi) in sizes.iter().enumerate() {
        let others: f64 = sizes
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, &xk)| g.eval(xk))
            .product();
        let e = law.expectation(&|s| s.sizes().map(|r| g.eval(xi * r)).product::<f64>() - g.eval(xi));
        let scale = xi.powf(alpha) * others;
        value += scale * e.value;
        var += (scale * e.std_err).powi(2);
    }
    Ok(Estimate {
        value,
        std_err: var.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::log::run;
    use approx::assert_abs_diff_eq;

    fn square() -> SizeFunctional {
        SizeFunctional::new(0.0, |s| s * s)
    }

    #[test]
    fn additive_generator_examples() {
        let law = DislocationLaw::uniform_binary();
        let g = generator_additive(&law, &MassPartition::unit(), &square(), 0.0).unwrap();
        assert_abs_diff_eq!(g.value, -1.0 / 3.0, epsilon = 1e-10);
        let g = generator_additive(&law, &MassPartition::empty(), &square(), 0.0).unwrap();
        assert_eq!(g.value, 0.0);
        let half = MassPartition::rank(&[0.5]).unwrap();
        let g = generator_additive(&law, &half, &square(), 1.0).unwrap();
        assert_abs_diff_eq!(g.value, -1.0 / 24.0, epsilon = 1e-10);
    }

    #[test]
    fn cutoff_violations_are_errors() {
        let law = DislocationLaw::uniform_binary();
        let shifted = SizeFunctional::new(0.0, |s| s + 1.0);
        assert!(matches!(
            generator_additive(&law, &MassPartition::unit(), &shifted, 0.0),
            Err(EngineError::CutoffViolation(_))
        ));
        let hinge = SizeFunctional::new(0.1, |s| (s - 0.1).max(0.0));
        assert!(generator_additive(&law, &MassPartition::unit(), &hinge, 0.0).is_ok());
        let bad = SizeFunctional::new(0.1, |s| s);
        assert!(generator_additive(&law, &MassPartition::unit(), &bad, 0.0).is_err());
    }

    #[test]
    fn multiplicative_generator_matches_finite_difference() {
        let law = DislocationLaw::uniform_binary();
        let g = SizeFunctional::new(0.0, |s| (-s * s).exp());
        let exact = generator_multiplicative(&law, &MassPartition::unit(), &g, 0.0).unwrap().value;
        let h = 0.01;
        let cfg = SimConfig::new(law, 0.0, h).with_snapshots(vec![h]).with_seed(11);
        let n = 200_000;
        let vals: Vec<f64> = crate::par::map_replicas(n, |r| {
            let log = run(&cfg, r as u64).unwrap();
            let m: f64 = log.snapshots[0].partition.sizes().map(|x| g.eval(x)).product();
            (m - (-1.0f64).exp()) / h
        });
        let est = Estimate::from_samples(&vals);
        assert!((est.value - exact).abs() < 4.0 * est.std_err + 0.01, "{est:?} vs {exact}");
    }

    #[test]
    fn energy_examples() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, 1.0).with_seed(5);
        assert_eq!(energy_cost(&cfg, &CostSpec::unit(0.0), 1.0, 0).unwrap(), 0.0);
        // α does not matter
        let fast = SimConfig::new(DislocationLaw::uniform_binary(), 2.0, 1.0).with_seed(5);
        let a = energy_cost(&cfg, &CostSpec::unit(1.5), 1e-3, 3).unwrap();
        let b = energy_cost(&fast, &CostSpec::unit(1.5), 1e-3, 3).unwrap();
        assert_eq!(a, b);
        // the number of splits of a unit-mass conservative binary tree above eps
        let n = energy_cost(&cfg, &CostSpec::unit(0.0), 1e-2, 0).unwrap();
        assert!(n >= 1.0 && n.fract() == 0.0);
    }

    #[test]
    fn exit_atoms_in_unit_interval_and_conservative_total() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, 1.0).with_seed(2);
        let s = exit_samples(&cfg, 1e-3, 0).unwrap();
        assert!(s.atoms.iter().all(|&a| a > 0.0 && a <= 1.0));
        assert_abs_diff_eq!(s.total_weight(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn shattering_extinction() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), -1.0, 50.0)
            .with_threshold(1e-4)
            .with_seed(1);
        for r in 0..50 {
            match extinction_time(&cfg, r).unwrap() {
                ExtinctionOutcome::Extinct { time, first_event } => assert!(time >= first_event),
                other => panic!("{other:?}"),
            }
        }
        let bad = SimConfig::new(DislocationLaw::uniform_binary(), 1.0, 5.0).with_threshold(1e-3);
        assert!(extinction_time(&bad, 0).is_err());
    }
}
