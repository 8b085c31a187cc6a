use serde::Serialize;

use super::{AnalyticError, Result};
use crate::laws::DislocationLaw;
use crate::numeric::quad::integrate;

const QUAD_TOL: f64 = 1e-12;

/// Limit ϱ of the weighted first-passage measure below a vanishing screen,
/// `ϱ(dx) = E[Σ 1{s_i < x} s_i^{p*}] / (x κ′(p*)) dx` on (0, 1).
#[derive(Debug, Clone, Serialize)]
pub struct ExitMeasureModel {
    #[serde(skip)]
    law: DislocationLaw,
    pub p_star: f64,
    pub kappa_prime: f64,
    /// Total mass of the density on (0, 1) by quadrature.
    pub normalization: f64,
}

impl ExitMeasureModel {
    pub(super) fn new(law: DislocationLaw, p_star: f64, kappa_prime: f64) -> Result<Self> {
        if kappa_prime <= 0.0 {
            return Err(AnalyticError::Precondition(format!(
                "kappa'(p*) = {kappa_prime} must be positive"
            )));
        }
        let mut model = Self {
            law,
            p_star,
            kappa_prime,
            normalization: f64::NAN,
        };
        model.normalization = integrate(|x| model.raw_density(x), 0.0, 1.0, QUAD_TOL).value;
        Ok(model)
    }

    fn raw_density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.law.truncated_moment(self.p_star, x).value / (x * self.kappa_prime)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(AnalyticError::OutsideUnitInterval { x });
        }
        Ok(self.raw_density(x))
    }

    /// `ϱ((0, x])`, clamped to `[0, 1]` outside the unit interval.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.normalization;
        }
        integrate(|y| self.raw_density(y), 0.0, x, QUAD_TOL).value
    }
}
