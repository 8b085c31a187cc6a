//! Exchangeable partitions of `{1..n}`, interval representations of
//! fragmentations, tagged fragments and Poissonian dislocations.

mod interval;
mod tagged;

use std::fmt;
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use interval::{partition_process, IntervalFragmentation};
pub use tagged::{tag_uniform, tagged_path, TaggedPath};

use crate::cascade::CascadeError;
use crate::engine::EngineError;
use crate::laws::DislocationLaw;
use crate::types::{MassPartition, RngStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("blocks do not partition 1..{n}: {reason}")]
    NotAPartition { n: usize, reason: String },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A partition of `{1, ..., n}` with blocks ordered by least element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartitionOfN {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl PartitionOfN {
    /// Validates and canonicalises `blocks`.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self, PartitionError> {
        let mut seen = vec![false; n + 1];
        for b in &mut blocks {
            if b.is_empty() {
                return Err(PartitionError::NotAPartition {
                    n,
                    reason: "empty block".into(),
                });
            }
            b.sort_unstable();
            for &i in b.iter() {
                if i == 0 || i > n || seen[i] {
                    return Err(PartitionError::NotAPartition {
                        n,
                        reason: format!("element {i} out of range or repeated"),
                    });
                }
                seen[i] = true;
            }
        }
        if seen.iter().skip(1).any(|s| !s) {
            return Err(PartitionError::NotAPartition {
                n,
                reason: "not every element is covered".into(),
            });
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(Self { n, blocks })
    }

    pub fn single_block(n: usize) -> Self {
        Self {
            n,
            blocks: if n == 0 { vec![] } else { vec![(1..=n).collect()] },
        }
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            blocks: (1..=n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// Block sizes divided by `n`, in block order.
    pub fn frequencies(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.len() as f64 / self.n as f64).collect()
    }

    pub fn singleton_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.len() == 1).count()
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &PartitionOfN) -> bool {
        if self.n != coarser.n {
            return false;
        }
        let mut owner = vec![0usize; self.n + 1];
        for (k, b) in coarser.blocks.iter().enumerate() {
            for &i in b {
                owner[i] = k;
            }
        }
        self.blocks.iter().all(|b| b.iter().all(|&i| owner[i] == owner[b[0]]))
    }

    /// Image under the relabelling `i -> perm[i - 1]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| perm[i - 1]).collect())
            .collect();
        Self::new(self.n, blocks).expect("relabelling a partition gives a partition")
    }

    /// Writes one line per block, members separated by commas.
    pub fn write_lines<W: Write>(&self, out: &mut W) -> io::Result<()> {
        for b in &self.blocks {
            let line: Vec<String> = b.iter().map(|i| i.to_string()).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

impl fmt::Display for PartitionOfN {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(","))
            .collect();
        write!(f, "{{{}}}", parts.join("|"))
    }
}

/// Index of the interval of the left-to-right layout of `sizes` containing
/// `u`, or `None` when `u` falls in the dust on the right.
pub(crate) fn locate(cumulative: &[f64], u: f64) -> Option<usize> {
    let k = cumulative.partition_point(|&c| c <= u);
    (k < cumulative.len()).then_some(k)
}

pub(crate) fn cumulative_sizes(s: &MassPartition) -> Vec<f64> {
    let mut acc = 0.0;
    s.sizes()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Kingman's paintbox: `i ~ j` when `U_i` and `U_j` fall in the same interval
/// of the layout of `s`; points in the dust are singletons.
pub fn paintbox<R: Rng + ?Sized>(s: &MassPartition, n: usize, rng: &mut R) -> PartitionOfN {
    let cumulative = cumulative_sizes(s);
    let mut by_interval: Vec<Vec<usize>> = vec![Vec::new(); cumulative.len()];
    let mut blocks = Vec::new();
    for i in 1..=n {
        let u: f64 = rng.random();
        match locate(&cumulative, u) {
            Some(k) => by_interval[k].push(i),
            None => blocks.push(vec![i]),
        }
    }
    blocks.extend(by_interval.into_iter().filter(|b| !b.is_empty()));
    PartitionOfN::new(n, blocks).expect("paintbox output is a partition")
}

/// One atom `(Δ, k, t)` of the Poisson point process driving a homogeneous
/// fragmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonAtom {
    pub ratios: MassPartition,
    pub index: usize,
    pub time: f64,
}

/// Replaces the `k`-th largest term of `state` by its `Δ`-rescaled pieces and
/// re-ranks. A state with fewer than `k` positive terms is left unchanged.
pub fn apply_atom(state: &MassPartition, atom: &PoissonAtom) -> MassPartition {
    let k = atom.index;
    if k == 0 || k > state.len() {
        return state.clone();
    }
    let logs = state.log_sizes();
    let target = logs[k - 1];
    let mut out: Vec<f64> = Vec::with_capacity(logs.len() + atom.ratios.len());
    out.extend(logs.iter().enumerate().filter(|&(i, _)| i != k - 1).map(|(_, &l)| l));
    out.extend(atom.ratios.log_sizes().iter().map(|r| target + r));
    MassPartition::from_logs_unchecked(out)
}

/// Homogeneous fragmentation from its Poissonian description with a finite
/// dislocation law: atoms arrive at rate one per positive term, each picking
/// a uniform index among them. Returns the state at each of `times`.
pub fn poissonian_run(
    law: &DislocationLaw,
    times: &[f64],
    rng: &mut RngStream,
) -> (Vec<MassPartition>, Vec<PoissonAtom>) {
    use rand_distr::{Distribution, Exp1};
    let mut state = MassPartition::unit();
    let mut atoms = Vec::new();
    let mut out = Vec::with_capacity(times.len());
    let mut now = 0.0;
    let mut next = times.iter().copied().peekable();
    loop {
        let rate = state.len() as f64;
        let wait: f64 = if rate > 0.0 {
            <Exp1 as Distribution<f64>>::sample(&Exp1, rng) / rate
        } else {
            f64::INFINITY
        };
        let at = now + wait;
        while let Some(&t) = next.peek() {
            if t < at {
                out.push(state.clone());
                next.next();
            } else {
                break;
            }
        }
        if next.peek().is_none() {
            break;
        }
        now = at;
        let atom = PoissonAtom {
            ratios: law.sample(rng),
            index: rng.random_range(1..=state.len()),
            time: now,
        };
        state = apply_atom(&state, &atom);
        atoms.push(atom);
    }
    (out, atoms)
}
