use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::PartitionError;
use crate::engine::{lifetime, EngineError, Screening, SimConfig};
use crate::types::{child_key, mix64, RngStream, ROOT_KEY};

const TAG_KEY: u64 = 0xbb67_ae85_84ca_a73b;
/// Jumps followed before a path is declared runaway.
const MAX_JUMPS: usize = 10_000_000;

fn tag_stream(seed: u64, replica: u64, i: u32) -> RngStream {
    RngStream::new(seed, replica).derive(child_key(mix64(TAG_KEY), i))
}

/// Position of tagged point `i` (1-based) in replica `replica`.
pub fn tag_uniform(seed: u64, replica: u64, i: u32) -> f64 {
    tag_stream(seed, replica, i).random()
}

/// Log size of the fragment containing a tagged point, as a step function.
///
/// Jumps are `(time, log size after)`; a jump to `-∞` means the point fell in
/// the dust. Erosion shrinks the fragment by the drift `-c t` on readout and
/// also swallows the point itself at rate `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedPath {
    pub horizon: f64,
    pub erosion: f64,
    jumps: Vec<(f64, f64)>,
}

impl TaggedPath {
    pub(crate) fn new(horizon: f64, erosion: f64) -> Self {
        Self {
            horizon,
            erosion,
            jumps: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, time: f64, log_size: f64) {
        self.jumps.push((time, log_size));
    }

    pub fn jumps(&self) -> &[(f64, f64)] {
        &self.jumps
    }

    pub fn is_absorbed(&self) -> bool {
        self.jumps.last().is_some_and(|j| j.1 == f64::NEG_INFINITY)
    }

    /// `ln χ(t)`, including the erosion drift.
    pub fn log_size_at(&self, t: f64) -> f64 {
        let k = self.jumps.partition_point(|j| j.0 <= t);
        let l = if k == 0 { 0.0 } else { self.jumps[k - 1].1 };
        l - self.erosion * t
    }

    pub fn size_at(&self, t: f64) -> f64 {
        self.log_size_at(t).exp()
    }
}

/// Follows the fragment containing tagged point 1 of replica `replica`
/// until `horizon`, drawing only the nodes on its lineage.
///
/// Exact and threshold screening are supported; under a threshold the point
/// is absorbed when its fragment is born at size at most `ε`.
pub fn tagged_path(cfg: &SimConfig, horizon: f64, replica: u64) -> Result<TaggedPath, PartitionError> {
    cfg.validate()?;
    let log_eps = match cfg.screening {
        Screening::Exact => f64::NEG_INFINITY,
        Screening::Threshold { epsilon } => epsilon.ln(),
        Screening::Roulette { .. } => {
            return Err(PartitionError::Precondition("tagged paths need exact or threshold screening".into()))
        }
    };
    if !(horizon >= 0.0) {
        return Err(PartitionError::Precondition(format!("horizon = {horizon} must be nonnegative")));
    }
    let mut tag = tag_stream(cfg.seed, replica, 1);
    let u: f64 = tag.random();
    let c = cfg.erosion.c;
    let eroded_at = if c > 0.0 {
        <Exp1 as Distribution<f64>>::sample(&Exp1, &mut tag) / c
    } else {
        f64::INFINITY
    };
    let base = RngStream::new(cfg.seed, replica);
    let mut path = TaggedPath::new(horizon, cfg.erosion.c);
    let (mut key, mut log_size, mut left, mut birth) = (ROOT_KEY, 0.0f64, 0.0f64, 0.0);
    for _ in 0..MAX_JUMPS {
        let mut stream = base.derive(key);
        let death = birth + lifetime(&mut stream, cfg.alpha, log_size);
        if eroded_at < death && eroded_at <= horizon {
            path.push(eroded_at, f64::NEG_INFINITY);
            return Ok(path);
        }
        if death > horizon {
            return Ok(path);
        }
        let ratios = cfg.law.sample(&mut stream);
        let mut pos = left;
        let mut next = None;
        for (j, &lr) in ratios.log_sizes().iter().enumerate() {
            let child = log_size + lr;
            let len = child.exp();
            if pos <= u && u < pos + len {
                next = Some((j as u32 + 1, child, pos));
                break;
            }
            pos += len;
        }
        match next {
            Some((j, child, at)) if child > log_eps => {
                path.push(death, child);
                key = child_key(key, j);
                log_size = child;
                left = at;
                birth = death;
            }
            _ => {
                path.push(death, f64::NEG_INFINITY);
                return Ok(path);
            }
        }
    }
    Err(PartitionError::Engine(EngineError::EventBudgetExceeded {
        cap: MAX_JUMPS as u64,
        time: birth,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::ErosionParams;
    use crate::laws::{DislocationLaw, Estimate};

    #[test]
    fn tagged_mean_is_kappa_at_two() {
        // E χ(t) = e^{-t κ(2)}: drift c and killing rate c on top of e^{-t/3}
        let c = 0.1;
        let t = 3.0;
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, t)
            .with_erosion(ErosionParams::new(c).unwrap())
            .with_seed(21);
        let vals: Vec<f64> = crate::par::map_replicas(40_000, |r| tagged_path(&cfg, t, r as u64).unwrap().size_at(t));
        let e = Estimate::from_samples(&vals);
        let exact = (-t * (2.0 * c + 1.0 / 3.0)).exp();
        assert!(e.z_score(exact).abs() < 4.0, "{e:?} vs {exact}");
        let plain = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, t).with_seed(22);
        let vals: Vec<f64> = crate::par::map_replicas(40_000, |r| tagged_path(&plain, t, r as u64).unwrap().size_at(t));
        let e = Estimate::from_samples(&vals);
        assert!(e.z_score((-1.0f64).exp()).abs() < 4.0, "{e:?}");
    }

    #[test]
    fn lossy_paths_can_be_absorbed() {
        let cfg = SimConfig::new(DislocationLaw::lossy_binary(), 0.0, 5.0).with_seed(2);
        let absorbed = (0..200)
            .filter(|&r| tagged_path(&cfg, 5.0, r).unwrap().is_absorbed())
            .count();
        assert!(absorbed > 0);
        let p = (0..200).map(|r| tagged_path(&cfg, 5.0, r).unwrap()).find(|p| p.is_absorbed()).unwrap();
        assert_eq!(p.size_at(5.0), 0.0);
    }

    #[test]
    fn threshold_absorbs_small_fragments() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), -1.0, 50.0).with_threshold(1e-3);
        let p = tagged_path(&cfg, 50.0, 0).unwrap();
        assert!(p.is_absorbed());
        let before = p.jumps()[p.jumps().len() - 2].1;
        assert!(before > 1e-3f64.ln());
    }

    #[test]
    fn roulette_is_refused() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, 1.0).with_screening(Screening::Roulette {
            epsilon: 1e-3,
            exponent: 1.0,
        });
        assert!(tagged_path(&cfg, 1.0, 0).is_err());
    }
}
