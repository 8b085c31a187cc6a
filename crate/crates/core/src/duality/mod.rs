//! Uniform random cuts of `(0, 1)` and the coalescent obtained by running
//! them backwards in logarithmic time.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{neumaier_sum, MassPartition};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualityError {
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Cuts arriving at the jump times of a unit-rate Poisson process, each at
/// an independent uniform location. `F(t)` is the ranked sequence of
/// lengths of `(0, 1)` minus the first `N_t` cuts; it is a self-similar
/// fragmentation of index 1 with the uniform binary dislocation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutProcess {
    pub horizon: f64,
    /// Jump times, increasing.
    pub times: Vec<f64>,
    /// Cut locations, aligned with `times`.
    pub cuts: Vec<f64>,
}

pub fn build_cut_process<R: Rng + ?Sized>(horizon: f64, rng: &mut R) -> Result<CutProcess, DualityError> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(DualityError::Precondition(format!("horizon = {horizon} must be positive and finite")));
    }
    let mut times = Vec::new();
    let mut cuts = Vec::new();
    let mut t = 0.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        t += e;
        if t > horizon {
            break;
        }
        times.push(t);
        cuts.push(rng.random::<f64>());
    }
    Ok(CutProcess { horizon, times, cuts })
}

/// Interval lengths between sorted interior points, left to right.
fn spacings(sorted: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    let mut out: Vec<f64> = sorted
        .iter()
        .map(|&c| {
            let l = c - prev;
            prev = c;
            l
        })
        .collect();
    out.push(1.0 - prev);
    out
}

fn ranked(lengths: &[f64]) -> MassPartition {
    MassPartition::from_logs_unchecked(lengths.iter().filter(|&&l| l > 0.0).map(|l| l.ln()).collect())
}

impl CutProcess {
    /// `N_t`.
    pub fn count_at(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    /// Interval lengths at `t`, left to right.
    pub fn lengths_at(&self, t: f64) -> Vec<f64> {
        let mut present = self.cuts[..self.count_at(t)].to_vec();
        present.sort_by(f64::total_cmp);
        spacings(&present)
    }

    /// `F(t)`.
    pub fn ranked_at(&self, t: f64) -> MassPartition {
        ranked(&self.lengths_at(t))
    }

    pub fn total_length_at(&self, t: f64) -> f64 {
        neumaier_sum(self.lengths_at(t))
    }
}

/// Removal of one cut, seen in coalescent time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeEvent {
    pub coal_time: f64,
    /// Fragmentation time of the removed cut, `e^{-coal_time}`.
    pub frag_time: f64,
    pub location: f64,
    /// Number of blocks just before the merge.
    pub n_before: usize,
    /// Ranks (1-based, `rank_i < rank_j`) of the two merging blocks among
    /// the ranked sizes just before the merge.
    pub rank_i: usize,
    pub rank_j: usize,
}

/// `C(t) = F(e^{-t})` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coalescent {
    pub horizon: f64,
    /// Merges in coalescent time order.
    pub events: Vec<MergeEvent>,
    /// Cuts still present at the horizon, as `(frag_time, location)`.
    pub residual: Vec<(f64, f64)>,
}

fn rank_of(lengths: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..lengths.len()).collect();
    idx.sort_by(|&a, &b| lengths[b].total_cmp(&lengths[a]).then(a.cmp(&b)));
    let mut rank = vec![0; lengths.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}

/// Exponential time reversal of `cut` over coalescent times `[0, horizon]`.
///
/// Cuts are removed from the most recent backwards; removing a cut merges
/// the two intervals adjacent to it.
pub fn reverse(cut: &CutProcess, horizon: f64) -> Result<Coalescent, DualityError> {
    if cut.horizon < 1.0 {
        return Err(DualityError::Precondition(format!(
            "the reversal starts from F(1); cut horizon {} is too short",
            cut.horizon
        )));
    }
    if !(horizon >= 0.0) {
        return Err(DualityError::Precondition(format!("horizon = {horizon} must be nonnegative")));
    }
    let n = cut.count_at(1.0);
    let mut present: Vec<f64> = cut.cuts[..n].to_vec();
    present.sort_by(f64::total_cmp);
    let mut events = Vec::new();
    let mut k = n;
    while k > 0 {
        let frag_time = cut.times[k - 1];
        let coal_time = -frag_time.ln();
        if coal_time > horizon {
            break;
        }
        let location = cut.cuts[k - 1];
        let lengths = spacings(&present);
        let rank = rank_of(&lengths);
        let at = present.partition_point(|&c| c < location);
        let (a, b) = (rank[at], rank[at + 1]);
        events.push(MergeEvent {
            coal_time,
            frag_time,
            location,
            n_before: lengths.len(),
            rank_i: a.min(b),
            rank_j: a.max(b),
        });
        present.remove(at);
        k -= 1;
    }
    let residual = (0..k).map(|i| (cut.times[i], cut.cuts[i])).collect();
    Ok(Coalescent {
        horizon,
        events,
        residual,
    })
}

impl Coalescent {
    fn present_at(&self, t: f64) -> Vec<f64> {
        let merged = self.events.partition_point(|e| e.coal_time <= t);
        let mut present: Vec<f64> = self.residual.iter().map(|r| r.1).collect();
        present.extend(self.events[merged..].iter().map(|e| e.location));
        present.sort_by(f64::total_cmp);
        present
    }

    pub fn block_count_at(&self, t: f64) -> usize {
        self.present_at(t).len() + 1
    }

    /// Ranked block sizes at coalescent time `t`.
    pub fn sizes_at(&self, t: f64) -> MassPartition {
        ranked(&spacings(&self.present_at(t)))
    }

    /// Block sizes along `grid`.
    pub fn trajectory(&self, grid: &[f64]) -> Vec<(f64, MassPartition)> {
        grid.iter().map(|&t| (t, self.sizes_at(t))).collect()
    }

    /// Cut process on fragmentation times `(0, 1]` whose reversal is `self`.
    pub fn reverse(&self) -> CutProcess {
        let mut pairs: Vec<(f64, f64)> = self.residual.clone();
        pairs.extend(self.events.iter().rev().map(|e| (e.frag_time, e.location)));
        CutProcess {
            horizon: 1.0,
            times: pairs.iter().map(|p| p.0).collect(),
            cuts: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Time spent with `n` blocks before each merge out of that state; the
    /// clock starts at 0 when the trajectory starts with `n` blocks.
    pub fn holding_times(&self, n: usize) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::new();
        for e in &self.events {
            if e.n_before == n {
                out.push(e.coal_time - prev);
            }
            prev = e.coal_time;
        }
        out
    }
}

/// Logarithmic grid of `points` coalescent times on `[0, max_time]`,
/// i.e. fragmentation times on `[e^{-max_time}, 1]`.
pub fn coalescent_grid(points: usize, max_time: f64) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..points).map(|i| max_time * i as f64 / (points - 1) as f64).collect(),
    }
}

/// `replica,coal_time,n_before,rank_i,rank_j`.
pub fn write_merge_csv<W: Write>(out: &mut W, runs: &[(u64, Coalescent)]) -> io::Result<()> {
    writeln!(out, "replica,coal_time,n_before,rank_i,rank_j")?;
    for (r, c) in runs {
        for e in &c.events {
            writeln!(out, "{},{},{},{},{}", r, e.coal_time, e.n_before, e.rank_i, e.rank_j)?;
        }
    }
    Ok(())
}
