use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::laws::{DislocationLaw, ErosionParams, LawSpec};

pub const DEFAULT_EVENT_CAP: u64 = 100_000_000;

/// How small fragments are handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Screening {
    /// Every fragment is tracked.
    Exact,
    /// Children of size at most `epsilon` become dust at birth.
    Threshold { epsilon: f64 },
    /// Russian roulette on the weighted size `w x^q`: a child whose weighted
    /// size falls below `epsilon^q` survives with probability
    /// `w x^q / epsilon^q` and is re-weighted to `epsilon^q / x^q`.
    /// Unbiased for every functional `Σ w X^q f(X)`.
    Roulette { epsilon: f64, exponent: f64 },
}

impl Screening {
    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            Screening::Exact => None,
            Screening::Threshold { epsilon } | Screening::Roulette { epsilon, .. } => Some(epsilon),
        }
    }
}

/// Validated simulation configuration.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub law: DislocationLaw,
    pub erosion: ErosionParams,
    pub alpha: f64,
    pub screening: Screening,
    /// Simulated time span; infinite means "until extinction".
    pub horizon: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub replicas: usize,
    pub event_cap: u64,
}

/// On-disk JSON form of [`SimConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfigFile {
    pub law: LawSpec,
    #[serde(default)]
    pub erosion: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(flatten)]
    pub screening: Screening,
    /// `null` runs until extinction.
    pub horizon: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default)]
    pub event_cap: Option<u64>,
}

fn one() -> usize {
    1
}

impl SimConfig {
    /// Minimal configuration: exact mode, one replica, no snapshots.
    pub fn new(law: DislocationLaw, alpha: f64, horizon: f64) -> Self {
        Self {
            law,
            erosion: ErosionParams::none(),
            alpha,
            screening: Screening::Exact,
            horizon,
            snapshot_times: Vec::new(),
            seed: 0,
            replicas: 1,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    pub fn with_screening(mut self, screening: Screening) -> Self {
        self.screening = screening;
        self
    }

    pub fn with_threshold(self, epsilon: f64) -> Self {
        self.with_screening(Screening::Threshold { epsilon })
    }

    pub fn with_erosion(mut self, erosion: ErosionParams) -> Self {
        self.erosion = erosion;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_event_cap(mut self, cap: u64) -> Self {
        self.event_cap = cap;
        self
    }

    /// Checks every precondition of the engine.
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::InvalidConfig(msg));
        if !self.alpha.is_finite() {
            return bad(format!("alpha = {} is not finite", self.alpha));
        }
        if !(self.horizon > 0.0) {
            return bad(format!("horizon = {} must be positive", self.horizon));
        }
        if self.replicas == 0 {
            return bad("replicas must be positive".into());
        }
        if self.event_cap == 0 {
            return bad("event cap must be positive".into());
        }
        let mut last = 0.0;
        for &t in &self.snapshot_times {
            if !(t >= last) || !t.is_finite() {
                return bad("snapshot times must be finite, nonnegative and sorted".into());
            }
            if t > self.horizon {
                return bad(format!("snapshot time {t} lies beyond the horizon {}", self.horizon));
            }
            last = t;
        }
        match self.screening {
            Screening::Exact => {
                if self.alpha < 0.0 {
                    return Err(EngineError::Precondition(format!(
                        "exact mode needs alpha >= 0 (got {}); negative indices shatter into infinitely many events",
                        self.alpha
                    )));
                }
                if self.law.metadata().max_children.is_none() {
                    return Err(EngineError::Precondition(
                        "exact mode needs a law with a bounded number of children".into(),
                    ));
                }
                if !self.horizon.is_finite() {
                    return Err(EngineError::Precondition("exact mode needs a finite horizon".into()));
                }
            }
            Screening::Threshold { epsilon } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return bad(format!("epsilon = {epsilon} must lie in (0, 1)"));
                }
            }
            Screening::Roulette { epsilon, exponent } => {
                if !(epsilon > 0.0 && epsilon < 1.0) {
                    return bad(format!("epsilon = {epsilon} must lie in (0, 1)"));
                }
                if !(exponent > 0.0 && exponent.is_finite()) {
                    return bad(format!("roulette exponent = {exponent} must be positive"));
                }
                if !self.horizon.is_finite() {
                    return Err(EngineError::Precondition("roulette mode needs a finite horizon".into()));
                }
            }
        }
        if self.erosion.c > 0.0 && self.alpha != 0.0 {
            return Err(EngineError::Precondition(
                "erosion is only supported for alpha = 0 (split rates would depend on eroded sizes)".into(),
            ));
        }
        Ok(())
    }

    pub fn from_file(file: &SimConfigFile) -> Result<Self, EngineError> {
        let cfg = Self {
            law: DislocationLaw::from_spec(&file.law)?,
            erosion: ErosionParams::new(file.erosion)?,
            alpha: file.alpha,
            screening: file.screening,
            horizon: file.horizon.unwrap_or(f64::INFINITY),
            snapshot_times: file.snapshot_times.clone(),
            seed: file.seed,
            replicas: file.replicas,
            event_cap: file.event_cap.unwrap_or(DEFAULT_EVENT_CAP),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, EngineError> {
        let file: SimConfigFile =
            serde_json::from_str(text).map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_file(&self) -> SimConfigFile {
        SimConfigFile {
            law: self.law.spec(),
            erosion: self.erosion.c,
            alpha: self.alpha,
            screening: self.screening,
            horizon: self.horizon.is_finite().then_some(self.horizon),
            snapshot_times: self.snapshot_times.clone(),
            seed: self.seed,
            replicas: self.replicas,
            event_cap: Some(self.event_cap),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{
            "law": {"name": "uniform_binary"},
            "alpha": 1.0,
            "mode": "threshold",
            "epsilon": 0.001,
            "horizon": 5.0,
            "snapshot_times": [1.0, 2.5],
            "seed": 9,
            "replicas": 4
        }"#;
        let cfg = SimConfig::from_json(text).unwrap();
        assert_eq!(cfg.screening, Screening::Threshold { epsilon: 0.001 });
        assert_eq!(cfg.replicas, 4);
        let again = SimConfig::from_file(&cfg.to_file()).unwrap();
        assert_eq!(again.to_file(), cfg.to_file());
    }

    #[test]
    fn exact_mode_rejects_negative_alpha() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), -1.0, 10.0);
        assert!(matches!(cfg.validate(), Err(EngineError::Precondition(_))));
        assert!(cfg.with_threshold(1e-3).validate().is_ok());
    }

    #[test]
    fn unknown_law_and_bad_fields() {
        let e = SimConfig::from_json(r#"{"law": {"name": "banana"}, "mode": "exact", "horizon": 1}"#);
        assert!(matches!(e, Err(EngineError::Law(_))));
        let e = SimConfig::from_json(r#"{"law": {"name": "uniform_binary"}, "mode": "threshold", "epsilon": 2, "horizon": 1}"#);
        assert!(matches!(e, Err(EngineError::InvalidConfig(_))));
        let e = SimConfig::from_json(r#"{"law": {"name": "uniform_binary"}, "mode": "exact", "horizon": 1, "snapshot_times": [2, 1]}"#);
        assert!(matches!(e, Err(EngineError::InvalidConfig(_))));
    }

    #[test]
    fn erosion_needs_homogeneous_index() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 1.0, 1.0).with_erosion(ErosionParams::new(0.1).unwrap());
        assert!(matches!(cfg.validate(), Err(EngineError::Precondition(_))));
    }
}
