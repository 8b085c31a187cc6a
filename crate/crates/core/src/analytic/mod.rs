//! The characteristic exponent κ and the deterministic quantities derived from it.

mod exit;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exit::ExitMeasureModel;

use crate::laws::{DislocationLaw, ErosionParams, Estimate, LawError};
use crate::numeric::roots::{bisect, Bracket};
use crate::types::neumaier_sum;

/// Default initial bracket for root searches on `(underline_p, inf)`.
pub const DEFAULT_BRACKET: Bracket = Bracket { lo: 1e-3, hi: 64.0 };
const BRACKET_CEILING: f64 = 1e6;
const ROOT_TOL: f64 = 1e-12;
const FD_STEP: f64 = 1e-4;

/// `|t| max κ` beyond which the moment series is refused.
pub const SERIES_RANGE: f64 = 30.0;
pub const SERIES_MAX_TERMS: usize = 200;
/// Target accuracy of the moment series (truncation and rounding).
pub const SERIES_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("argument {x} outside the open unit interval")]
    OutsideUnitInterval { x: f64 },
    #[error("kappa has no sign change on [{lo}, {hi}]; the Malthusian hypothesis cannot be verified")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("moment series outside its validated range: {0}")]
    SeriesRange(String),
}

pub type Result<T> = std::result::Result<T, AnalyticError>;

/// Moments `∫ y^{αk} ρ(dy)`, `k = 1..K`, of the self-similar limit measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitMeasureRho {
    pub alpha: f64,
    pub moments: Vec<f64>,
}

impl LimitMeasureRho {
    /// Moment of order `k` (1-based).
    pub fn moment(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.moments.get(i).copied())
    }
}

/// κ(p) = c p + ∫ (1 − Σ s_i^p) ν(ds) for one law and erosion rate.
#[derive(Debug, Clone)]
pub struct KappaFunction {
    law: DislocationLaw,
    erosion: ErosionParams,
    underline_p: f64,
    p_star: OnceLock<Result<f64>>,
    p_bar: OnceLock<Result<f64>>,
}

impl KappaFunction {
    pub fn new(law: DislocationLaw, erosion: ErosionParams) -> Self {
        let underline_p = law.underline_p();
        Self {
            law,
            erosion,
            underline_p,
            p_star: OnceLock::new(),
            p_bar: OnceLock::new(),
        }
    }

    pub fn without_erosion(law: DislocationLaw) -> Self {
        Self::new(law, ErosionParams::none())
    }

    pub fn law(&self) -> &DislocationLaw {
        &self.law
    }

    pub fn erosion(&self) -> ErosionParams {
        self.erosion
    }

    pub fn underline_p(&self) -> f64 {
        self.underline_p
    }

    /// κ(p) with the Monte Carlo standard error, zero for closed-form laws.
    pub fn kappa_estimate(&self, p: f64) -> Result<Estimate> {
        let m = self.law.sigma_moment(p)?;
        Ok(Estimate {
            value: self.erosion.c * p + (1.0 - m.value),
            std_err: m.std_err,
        })
    }

    pub fn kappa(&self, p: f64) -> Result<f64> {
        self.kappa_estimate(p).map(|e| e.value)
    }

    fn check_domain(&self, p: f64) -> Result<()> {
        if p <= self.underline_p {
            return Err(LawError::Divergent {
                p,
                underline_p: self.underline_p,
            }
            .into());
        }
        Ok(())
    }

    /// Derivative of κ of order 1 or 2.
    ///
    /// Analytic for closed-form laws, otherwise central differences with one
    /// Richardson step.
    pub fn kappa_derivative(&self, p: f64, order: u32) -> Result<f64> {
        self.check_domain(p)?;
        if !(1..=2).contains(&order) {
            return Err(AnalyticError::Precondition(format!("derivative order {order} not in {{1, 2}}")));
        }
        if let Some(d) = self.law.inner().sigma_moment_derivative(p, order) {
            let drift = if order == 1 { self.erosion.c } else { 0.0 };
            return Ok(drift - d);
        }
        let h = FD_STEP.min(0.5 * (p - self.underline_p));
        let diff = |h: f64| -> Result<f64> {
            let (lo, mid, hi) = (self.kappa(p - h)?, self.kappa(p)?, self.kappa(p + h)?);
            Ok(match order {
                1 => (hi - lo) / (2.0 * h),
                _ => (hi - 2.0 * mid + lo) / (h * h),
            })
        };
        let coarse = diff(h)?;
        let fine = diff(0.5 * h)?;
        Ok((4.0 * fine - coarse) / 3.0)
    }

    pub fn kappa_prime(&self, p: f64) -> Result<f64> {
        self.kappa_derivative(p, 1)
    }

    pub fn kappa_second(&self, p: f64) -> Result<f64> {
        self.kappa_derivative(p, 2)
    }

    fn conservative_without_erosion(&self) -> bool {
        self.law.metadata().conservative && self.erosion.is_none()
    }

    /// Malthusian exponent p*, the root of κ. Cached.
    pub fn malthusian(&self) -> Result<f64> {
        self.p_star
            .get_or_init(|| self.malthusian_from(DEFAULT_BRACKET))
            .clone()
    }

    /// Root of κ starting the bracket expansion from `start`.
    pub fn malthusian_from(&self, start: Bracket) -> Result<f64> {
        if self.conservative_without_erosion() {
            return Ok(1.0);
        }
        let floor = self.underline_p;
        let mut lo = start.lo.max(floor + 1e-6);
        let mut hi = start.hi.max(lo * 2.0);
        let mut k_lo = self.kappa(lo)?;
        while k_lo > 0.0 && lo - floor > 1e-12 {
            lo = floor + 0.5 * (lo - floor);
            k_lo = self.kappa(lo)?;
        }
        let mut k_hi = self.kappa(hi)?;
        while k_hi < 0.0 && hi < BRACKET_CEILING {
            lo = hi;
            hi *= 2.0;
            k_hi = self.kappa(hi)?;
        }
        let bracket = Bracket { lo, hi };
        let mut failure = None;
        let root = bisect(
            |p| match self.kappa(p) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            bracket,
            ROOT_TOL,
            ROOT_TOL,
        );
        if let Some(e) = failure {
            return Err(e.into());
        }
        root.ok_or(AnalyticError::NoSignChange { lo, hi })
    }

    fn require_conservative(&self, what: &str) -> Result<()> {
        if !self.conservative_without_erosion() {
            return Err(AnalyticError::Precondition(format!(
                "{what} needs a conservative law without erosion"
            )));
        }
        Ok(())
    }

    /// p̄, the maximiser of κ(p)/p on (1, inf). Cached.
    pub fn p_bar(&self) -> Result<f64> {
        self.p_bar.get_or_init(|| self.p_bar_from(Bracket { lo: 1.0, hi: 64.0 })).clone()
    }

    /// Root of pκ′(p) − κ(p) starting the bracket expansion from `start`.
    pub fn p_bar_from(&self, start: Bracket) -> Result<f64> {
        self.require_conservative("p_bar")?;
        let g = |p: f64| -> Result<f64> { Ok(p * self.kappa_prime(p)? - self.kappa(p)?) };
        let lo = start.lo.max(1.0);
        let mut hi = start.hi.max(lo * 2.0);
        while g(hi)? > 0.0 && hi < BRACKET_CEILING {
            hi *= 2.0;
        }
        let mut failure = None;
        let root = bisect(
            |p| match g(p) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            },
            Bracket { lo, hi },
            ROOT_TOL,
            0.0,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        root.ok_or(AnalyticError::NoSignChange { lo, hi })
    }

    /// `E Σ X_i^p(t)` by the series `Σ_n (−t)^n/n! Π_{k<n} κ(p + αk)`.
    ///
    /// Refused when `t · max κ` exceeds [`SERIES_RANGE`], when 200 terms do
    /// not bring the first omitted term under [`SERIES_TOL`], or when
    /// cancellation between terms would cost more than that accuracy.
    pub fn moment_series(&self, p: f64, t: f64, alpha: f64) -> Result<f64> {
        if t < 0.0 || !t.is_finite() {
            return Err(AnalyticError::Precondition(format!("time {t} must be finite and nonnegative")));
        }
        if t == 0.0 {
            return Ok(1.0);
        }
        let mut terms: Vec<f64> = vec![1.0];
        let mut term = 1.0f64;
        let mut max_kappa = 0.0f64;
        for n in 0..SERIES_MAX_TERMS {
            let q = p + alpha * n as f64;
            self.check_domain(q)?;
            let k = self.kappa(q)?;
            max_kappa = max_kappa.max(k.abs());
            if t * max_kappa > SERIES_RANGE {
                return Err(AnalyticError::SeriesRange(format!(
                    "t * kappa = {} exceeds {SERIES_RANGE}",
                    t * max_kappa
                )));
            }
            term *= -t * k / (n + 1) as f64;
            if term.abs() < SERIES_TOL * 1e-2 {
                let rounding = neumaier_sum(terms.iter().map(|x| x.abs())) * f64::EPSILON;
                if rounding > SERIES_TOL {
                    return Err(AnalyticError::SeriesRange(format!(
                        "cancellation error {rounding:e} above {SERIES_TOL:e}"
                    )));
                }
                return Ok(neumaier_sum(terms.iter().copied()));
            }
            terms.push(term);
        }
        Err(AnalyticError::SeriesRange(format!(
            "no convergence within {SERIES_MAX_TERMS} terms"
        )))
    }

    /// Moments of the limit measure ρ of `t^{1/α} X(t)`.
    pub fn rho_moments(&self, alpha: f64, k_max: usize) -> Result<LimitMeasureRho> {
        if alpha <= 0.0 {
            return Err(AnalyticError::Precondition(format!("alpha = {alpha} must be positive")));
        }
        if self.law.metadata().geometric {
            return Err(AnalyticError::Precondition("rho needs a non-geometric law".into()));
        }
        let p = self.malthusian()?;
        let base = alpha * self.kappa_prime(p)?;
        let mut moments = Vec::with_capacity(k_max);
        let mut value = 1.0 / base;
        for k in 1..=k_max {
            if k > 1 {
                value *= (k - 1) as f64 / self.kappa(p + (k - 1) as f64 * alpha)?;
            }
            moments.push(value);
        }
        Ok(LimitMeasureRho { alpha, moments })
    }

    /// Limit density of the exit measure at `x`.
    pub fn exit_density(&self, x: f64) -> Result<f64> {
        self.exit_measure()?.density(x)
    }

    pub fn exit_measure(&self) -> Result<ExitMeasureModel> {
        if !self.erosion.is_none() {
            return Err(AnalyticError::Precondition("exit measure needs c = 0".into()));
        }
        if self.law.metadata().geometric {
            return Err(AnalyticError::Precondition("exit measure needs a non-geometric law".into()));
        }
        let p = self.malthusian()?;
        ExitMeasureModel::new(self.law.clone(), p, self.kappa_prime(p)?)
    }

    /// `E χ(t)^q = exp(−t κ(q + 1))` for the tagged fragment.
    pub fn tagged_laplace(&self, q: f64, t: f64) -> Result<f64> {
        if q <= 0.0 || t < 0.0 {
            return Err(AnalyticError::Precondition(format!("need q > 0 and t >= 0, got q = {q}, t = {t}")));
        }
        Ok((-t * self.kappa(q + 1.0)?).exp())
    }

    /// μ(t): expected number of children whose ratio is at least `e^{−t}`.
    pub fn reproduction_intensity(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(AnalyticError::Precondition(format!("t = {t} must be nonnegative")));
        }
        Ok(self.law.count_at_least((-t).exp()).value)
    }
}
