use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::{EngineError, Screening, SimConfig};
use crate::types::{Lineage, MassPartition, RngStream, TreeMark};

/// A live (tracked) fragment.
#[derive(Debug, Clone)]
pub struct Fragment {
    pub lineage: Lineage,
    /// Natural log of the size before erosion.
    pub log_size: f64,
    /// Natural log of the importance weight (zero outside roulette mode).
    pub log_weight: f64,
    pub birth: f64,
    pub death: f64,
}

impl Fragment {
    pub fn mark(&self) -> TreeMark {
        TreeMark {
            log_size: self.log_size,
            birth: self.birth,
            lifetime: self.death - self.birth,
        }
    }
}

impl PartialEq for Fragment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Fragment {}

impl PartialOrd for Fragment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fragment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.death
            .total_cmp(&other.death)
            .then_with(|| self.lineage.to_label().cmp(&other.lineage.to_label()))
    }
}

/// Read-only view of the live population at a snapshot time.
pub struct Population<'a> {
    heap: &'a BinaryHeap<Reverse<Fragment>>,
    log_drift: f64,
}

impl<'a> Population<'a> {
    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Live fragments in no particular order; sizes are before erosion.
    pub fn fragments(&self) -> impl Iterator<Item = &'a Fragment> + 'a {
        self.heap.iter().map(|r| &r.0)
    }

    /// `-c t`, added to every log size at readout.
    pub fn log_drift(&self) -> f64 {
        self.log_drift
    }

    /// `(log size after erosion, log weight)` for every live fragment.
    pub fn weighted_logs(&self) -> impl Iterator<Item = (f64, f64)> + 'a {
        let drift = self.log_drift;
        self.fragments().map(move |f| (f.log_size + drift, f.log_weight))
    }

    /// Ranked sizes after erosion (weights ignored).
    pub fn partition(&self) -> MassPartition {
        MassPartition::from_logs_unchecked(self.weighted_logs().map(|(l, _)| l).collect())
    }
}

/// Hooks called by [`run_with`] as the simulation proceeds.
pub trait Observer {
    fn on_birth(&mut self, _child: &Fragment) {}

    /// `ratios` are the ranked child-to-parent ratios drawn at this split.
    fn on_split(&mut self, _time: f64, _parent: &Fragment, _ratios: &MassPartition) {}

    /// A child at or below the threshold, turned to dust at `time`.
    fn on_screened(&mut self, _time: f64, _parent: &Fragment, _child_log_size: f64) {}

    fn on_snapshot(&mut self, _time: f64, _population: &Population<'_>) {}
}

impl Observer for () {}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_birth(&mut self, child: &Fragment) {
        self.0.on_birth(child);
        self.1.on_birth(child);
    }
    fn on_split(&mut self, time: f64, parent: &Fragment, ratios: &MassPartition) {
        self.0.on_split(time, parent, ratios);
        self.1.on_split(time, parent, ratios);
    }
    fn on_screened(&mut self, time: f64, parent: &Fragment, child_log_size: f64) {
        self.0.on_screened(time, parent, child_log_size);
        self.1.on_screened(time, parent, child_log_size);
    }
    fn on_snapshot(&mut self, time: f64, population: &Population<'_>) {
        self.0.on_snapshot(time, population);
        self.1.on_snapshot(time, population);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub events: u64,
    /// Time of the last split when the population died out before the horizon.
    pub extinction_time: Option<f64>,
    /// Time of the last processed split (0 if none).
    pub last_event: f64,
    pub live_at_end: usize,
}

/// Lifetime of a fragment: `e · size^{-α}` with `e` the first draw of its stream.
pub(crate) fn lifetime(stream: &mut RngStream, alpha: f64, log_size: f64) -> f64 {
    let e: f64 = Exp1.sample(stream);
    e * (-alpha * log_size).exp()
}

/// Stream of the node with the given lineage key inside replica `replica`.
pub fn node_stream(seed: u64, replica: u64, key: u64) -> RngStream {
    RngStream::new(seed, replica).derive(key)
}

/// Simulates one replica, feeding every event to `obs`.
///
/// Each node owns a stream derived from its lineage key; the first draw is
/// its exponential clock, then its dislocation, then roulette uniforms for
/// its children. Any construction that follows the same plan reproduces the
/// same genealogy.
pub fn run_with<O: Observer + ?Sized>(cfg: &SimConfig, replica: u64, obs: &mut O) -> Result<RunSummary, EngineError> {
    cfg.validate()?;
    let base = RngStream::new(cfg.seed, replica);
    let alpha = cfg.alpha;
    let c = cfg.erosion.c;
    let mut heap: BinaryHeap<Reverse<Fragment>> = BinaryHeap::new();

    let spawn = |lineage: Lineage, log_size: f64, log_weight: f64, birth: f64| {
        let mut s = base.derive(lineage.key());
        let death = birth + lifetime(&mut s, alpha, log_size);
        Fragment {
            lineage,
            log_size,
            log_weight,
            birth,
            death,
        }
    };

    let root = spawn(Lineage::root(), 0.0, 0.0, 0.0);
    obs.on_birth(&root);
    heap.push(Reverse(root));

    let mut snaps = cfg.snapshot_times.iter().copied().peekable();
    let mut events = 0u64;
    let mut now = 0.0;
    loop {
        let next = heap.peek().map_or(f64::INFINITY, |r| r.0.death);
        while let Some(&s) = snaps.peek() {
            if s < next {
                obs.on_snapshot(
                    s,
                    &Population {
                        heap: &heap,
                        log_drift: -c * s,
                    },
                );
                snaps.next();
            } else {
                break;
            }
        }
        if heap.is_empty() || next > cfg.horizon {
            break;
        }
        let Reverse(parent) = heap.pop().expect("non-empty");
        events += 1;
        if events > cfg.event_cap {
            return Err(EngineError::EventBudgetExceeded {
                cap: cfg.event_cap,
                time: parent.death,
            });
        }
        now = parent.death;
        let mut stream = base.derive(parent.lineage.key());
        let _clock: f64 = Exp1.sample(&mut stream);
        let ratios = cfg.law.sample(&mut stream);
        obs.on_split(now, &parent, &ratios);
        for (i, &lr) in ratios.log_sizes().iter().enumerate() {
            let log_size = parent.log_size + lr;
            let index = i as u32 + 1;
            let log_weight = match cfg.screening {
                Screening::Exact => parent.log_weight,
                Screening::Threshold { epsilon } => {
                    if log_size <= epsilon.ln() {
                        obs.on_screened(now, &parent, log_size);
                        continue;
                    }
                    parent.log_weight
                }
                Screening::Roulette { epsilon, exponent } => {
                    let floor = exponent * epsilon.ln();
                    let deficit = parent.log_weight + exponent * log_size - floor;
                    if deficit >= 0.0 {
                        parent.log_weight
                    } else if stream.random::<f64>() < deficit.exp() {
                        floor - exponent * log_size
                    } else {
                        continue;
                    }
                }
            };
            let child = spawn(parent.lineage.child(index), log_size, log_weight, now);
            obs.on_birth(&child);
            heap.push(Reverse(child));
        }
    }
    Ok(RunSummary {
        events,
        extinction_time: heap.is_empty().then_some(now),
        last_event: now,
        live_at_end: heap.len(),
    })
}
