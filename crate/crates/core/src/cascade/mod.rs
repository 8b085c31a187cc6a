//! Generation-by-generation construction of the genealogical tree with its
//! marks `(ξ_u, a_u, ζ_u)`, the intrinsic martingale and the fixed-point
//! identity.
//!
//! Node streams follow the engine's randomness plan, so a tree grown here
//! and a time-ordered run with the same `(seed, replica)` share every draw.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{lifetime, CostSpec};
use crate::laws::DislocationLaw;
use crate::stats::{ks_statistic, ks_p_value, Criterion, StatsError, TestReport};
use crate::types::{child_key, neumaier_sum, MassPartition, NodeLabel, RngStream, TreeMark, ROOT_KEY};

pub const POPULATION_CAP: usize = 10_000_000;
/// Generation used as the proxy for the terminal value of the intrinsic martingale.
pub const PROXY_GENERATION: usize = 12;
pub const MIN_FIXED_POINT_SAMPLES: usize = 500;
/// Martingale values are rounded to this grid before comparing laws, so that
/// values equal to one up to summation error compare equal.
pub const ROUNDING_GRID: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error("population cap of {cap} nodes exceeded")]
    PopulationCap { cap: usize },
    #[error("tree too shallow: node {label} died at {death} <= {time} but was not expanded")]
    FrontierTruncation { label: NodeLabel, death: f64, time: f64 },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    /// Position among the parent's ranked children (1-based; 0 for the root).
    pub index: u32,
    pub key: u64,
    pub generation: u32,
    /// `ln ξ̃_u`, the ratio to the parent (0 for the root).
    pub log_ratio: f64,
    pub mark: TreeMark,
    /// Children are stored at `children.0 .. children.1` when expanded.
    pub children: Option<(usize, usize)>,
}

/// Marked Ulam–Harris tree, stored breadth first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkedTree {
    pub alpha: f64,
    pub seed: u64,
    pub replica: u64,
    nodes: Vec<TreeNode>,
    /// Largest `n` such that every node of generation `n` is present.
    complete_generations: usize,
}

/// Which nodes to expand while growing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthRule {
    /// Every node of generation `< n`.
    Generations(usize),
    /// Every node dead by time `t` (`a_u + ζ_u <= t`).
    UntilTime(f64),
    /// Every node of size `> floor`.
    SizeAbove(f64),
}

impl MarkedTree {
    fn expand_if(&self, rule: GrowthRule, node: &TreeNode) -> bool {
        match rule {
            GrowthRule::Generations(n) => (node.generation as usize) < n,
            GrowthRule::UntilTime(t) => node.mark.death() <= t,
            GrowthRule::SizeAbove(floor) => node.mark.log_size > floor.ln(),
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn complete_generations(&self) -> usize {
        self.complete_generations
    }

    pub fn label(&self, i: usize) -> NodeLabel {
        let mut path = Vec::new();
        let mut cur = i;
        while let Some(p) = self.nodes[cur].parent {
            path.push(self.nodes[cur].index);
            cur = p;
        }
        path.reverse();
        NodeLabel::from_path(path)
    }

    /// Nodes of generation `n`.
    pub fn generation(&self, n: usize) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(move |u| u.generation as usize == n)
    }

    /// Ranked ratios drawn at an expanded node.
    pub fn ratios(&self, i: usize) -> Option<MassPartition> {
        let (a, b) = self.nodes[i].children?;
        Some(MassPartition::from_logs_unchecked(
            self.nodes[a..b].iter().map(|c| c.log_ratio).collect(),
        ))
    }
}

/// Grows the tree of one replica breadth first, expanding the nodes selected
/// by `rule`.
pub fn grow_with(
    law: &DislocationLaw,
    alpha: f64,
    seed: u64,
    replica: u64,
    rule: GrowthRule,
) -> Result<MarkedTree, CascadeError> {
    let base = RngStream::new(seed, replica);
    let mut root_stream = base.derive(ROOT_KEY);
    let root = TreeNode {
        parent: None,
        index: 0,
        key: ROOT_KEY,
        generation: 0,
        log_ratio: 0.0,
        mark: TreeMark {
            log_size: 0.0,
            birth: 0.0,
            lifetime: lifetime(&mut root_stream, alpha, 0.0),
        },
        children: None,
    };
    let mut tree = MarkedTree {
        alpha,
        seed,
        replica,
        nodes: vec![root],
        complete_generations: 0,
    };
    let mut broken = false;
    let (mut gen_start, mut gen_end) = (0, 1);
    while gen_start < gen_end {
        if !broken {
            tree.complete_generations = tree.nodes[gen_start].generation as usize;
        }
        for i in gen_start..gen_end {
            let node = tree.nodes[i].clone();
            if !tree.expand_if(rule, &node) {
                broken = true;
                continue;
            }
            let mut stream = base.derive(node.key);
            let _clock: f64 = rand_distr::Distribution::sample(&rand_distr::Exp1, &mut stream);
            let ratios = law.sample(&mut stream);
            let start = tree.nodes.len();
            if start + ratios.len() > POPULATION_CAP {
                return Err(CascadeError::PopulationCap { cap: POPULATION_CAP });
            }
            let birth = node.mark.birth + node.mark.lifetime;
            for (j, &lr) in ratios.log_sizes().iter().enumerate() {
                let index = j as u32 + 1;
                let key = child_key(node.key, index);
                let log_size = node.mark.log_size + lr;
                let mut s = base.derive(key);
                tree.nodes.push(TreeNode {
                    parent: Some(i),
                    index,
                    key,
                    generation: node.generation + 1,
                    log_ratio: lr,
                    mark: TreeMark {
                        log_size,
                        birth,
                        lifetime: lifetime(&mut s, alpha, log_size),
                    },
                    children: None,
                });
            }
            tree.nodes[i].children = Some((start, tree.nodes.len()));
        }
        gen_start = gen_end;
        gen_end = tree.nodes.len();
    }
    Ok(tree)
}

/// Full tree to generation `n`.
pub fn grow(law: &DislocationLaw, alpha: f64, n: usize, seed: u64, replica: u64) -> Result<MarkedTree, CascadeError> {
    grow_with(law, alpha, seed, replica, GrowthRule::Generations(n))
}

/// Tree containing every node born by time `t`.
pub fn grow_until(law: &DislocationLaw, alpha: f64, t: f64, seed: u64, replica: u64) -> Result<MarkedTree, CascadeError> {
    grow_with(law, alpha, seed, replica, GrowthRule::UntilTime(t))
}

/// `𝓜_n = Σ_{|u|=n} ξ_u^{p*}` for every completely grown generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSeries {
    pub values: Vec<f64>,
}

impl MartingaleSeries {
    pub fn value(&self, n: usize) -> Option<f64> {
        self.values.get(n).copied()
    }

    pub fn terminal_proxy(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

pub fn intrinsic_martingale(tree: &MarkedTree, p_star: f64) -> MartingaleSeries {
    let gens = tree.complete_generations;
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); gens + 1];
    for u in tree.nodes() {
        let g = u.generation as usize;
        if g <= gens {
            terms[g].push((p_star * u.mark.log_size).exp());
        }
    }
    MartingaleSeries {
        values: terms.into_iter().map(neumaier_sum).collect(),
    }
}

fn round_to_grid(x: f64) -> f64 {
    (x / ROUNDING_GRID).round() * ROUNDING_GRID
}

/// Compares direct samples of `𝓜_N` with recompositions
/// `Σ_j ξ_j^{p*} 𝓜^{(j)}_N`, with fresh ratios `ξ ~ ν` and the `𝓜^{(j)}`
/// drawn from `pool`. Passes when the KS distance is below `max_distance`.
pub fn fixed_point_check(
    direct: &[f64],
    pool: &[f64],
    law: &DislocationLaw,
    p_star: f64,
    recompositions: usize,
    max_distance: f64,
    rng: &mut RngStream,
) -> Result<TestReport, CascadeError> {
    for n in [direct.len(), pool.len(), recompositions] {
        if n < MIN_FIXED_POINT_SAMPLES {
            return Err(CascadeError::InsufficientSamples {
                needed: MIN_FIXED_POINT_SAMPLES,
                got: n,
            });
        }
    }
    let recomposed: Vec<f64> = (0..recompositions)
        .map(|_| {
            let xi = law.sample(rng);
            let terms = xi
                .log_sizes()
                .iter()
                .map(|&l| (p_star * l).exp() * pool[rng.random_range(0..pool.len())]);
            round_to_grid(neumaier_sum(terms))
        })
        .collect();
    let direct: Vec<f64> = direct.iter().map(|&x| round_to_grid(x)).collect();
    let d = ks_statistic(&direct, &recomposed)?;
    let (n, m) = (direct.len() as f64, recomposed.len() as f64);
    Ok(TestReport::new(
        d,
        ks_p_value(d, n * m / (n + m)),
        vec![direct.len(), recomposed.len()],
        Criterion::StatisticBelow,
        max_distance,
    ))
}

/// Ranked sizes of the nodes alive at `t`, i.e. with `a_u <= t < a_u + ζ_u`.
pub fn time_slice(tree: &MarkedTree, t: f64) -> Result<MassPartition, CascadeError> {
    let mut logs = Vec::new();
    for (i, u) in tree.nodes().iter().enumerate() {
        if u.mark.is_alive(t) {
            logs.push(u.mark.log_size);
        } else if u.children.is_none() && u.mark.death() <= t {
            return Err(CascadeError::FrontierTruncation {
                label: tree.label(i),
                death: u.mark.death(),
                time: t,
            });
        }
    }
    Ok(MassPartition::from_logs_unchecked(logs))
}

/// `Σ_u 1{ξ_u > ε} ξ_u^β φ(ratios at u)` over the expanded nodes.
///
/// The tree must have been grown with `GrowthRule::SizeAbove(ε)` (or deeper).
pub fn energy_cost(tree: &MarkedTree, cost: &CostSpec, epsilon: f64) -> f64 {
    let le = epsilon.ln();
    neumaier_sum(
        (0..tree.len())
            .filter(|&i| tree.nodes[i].mark.log_size > le)
            .filter_map(|i| tree.ratios(i).map(|r| cost.term(tree.nodes[i].mark.log_size, &r))),
    )
}

/// `label,log_size,birth,lifetime` rows in breadth-first order.
pub fn write_tree_csv<W: Write>(out: &mut W, tree: &MarkedTree) -> io::Result<()> {
    writeln!(out, "label,log_size,birth,lifetime")?;
    for (i, u) in tree.nodes().iter().enumerate() {
        writeln!(out, "{},{},{},{}", tree.label(i), u.mark.log_size, u.mark.birth, u.mark.lifetime)?;
    }
    Ok(())
}
