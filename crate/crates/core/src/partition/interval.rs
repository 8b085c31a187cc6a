use serde::{Deserialize, Serialize};

use super::{tag_uniform, PartitionError, PartitionOfN, TaggedPath};
use crate::cascade::{grow_until, CascadeError, MarkedTree};
use crate::engine::SimConfig;
use crate::laws::DislocationLaw;
use crate::types::MassPartition;

/// Nested open subintervals of `(0, 1)`: node `u` of a marked tree occupies
/// `(left_u, left_u + ξ_u)`, its children are laid out left to right in
/// ranked order, and the unused right end of each parent is dust.
///
/// `n` tagged uniforms `U_1, ..., U_n` are fixed per run; `U_i ~ U_j` at
/// time `t` when both lie in the same interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalFragmentation {
    alpha: f64,
    tree: MarkedTree,
    left: Vec<f64>,
    birth: Vec<f64>,
    death: Vec<f64>,
    tags: Vec<f64>,
}

impl IntervalFragmentation {
    /// Interval layout of `tree`, with its own clocks.
    pub fn from_tree(tree: MarkedTree, tags: Vec<f64>) -> Self {
        let n = tree.len();
        let mut left = vec![0.0; n];
        for (i, u) in tree.nodes().iter().enumerate() {
            if let Some((a, b)) = u.children {
                let mut pos = left[i];
                for (c, child) in tree.nodes()[a..b].iter().enumerate() {
                    left[a + c] = pos;
                    pos += child.mark.log_size.exp();
                }
            }
        }
        let birth = tree.nodes().iter().map(|u| u.mark.birth).collect();
        let death = tree.nodes().iter().map(|u| u.mark.death()).collect();
        Self {
            alpha: tree.alpha,
            tree,
            left,
            birth,
            death,
            tags,
        }
    }

    /// Grows every node dead by `horizon` and fixes `n_tags` tagged points.
    pub fn generate(
        law: &DislocationLaw,
        alpha: f64,
        horizon: f64,
        n_tags: usize,
        seed: u64,
        replica: u64,
    ) -> Result<Self, PartitionError> {
        let tree = grow_until(law, alpha, horizon, seed, replica)?;
        let tags = (1..=n_tags).map(|i| tag_uniform(seed, replica, i as u32)).collect();
        Ok(Self::from_tree(tree, tags))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tree(&self) -> &MarkedTree {
        &self.tree
    }

    pub fn tags(&self) -> &[f64] {
        &self.tags
    }

    /// `(left, length)` of node `i`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.left[i], self.tree.nodes()[i].mark.log_size.exp())
    }

    /// `(birth, death)` of node `i` on this fragmentation's clock.
    pub fn span(&self, i: usize) -> (f64, f64) {
        (self.birth[i], self.death[i])
    }

    /// Self-similar fragmentation of index `alpha` obtained from this
    /// homogeneous one by running each interval on the clock
    /// `T ↦ ∫_0^T |I(v)|^{-α} dv`. Each interval keeps its position and its
    /// homogeneous lifetime is stretched by `|I|^{-α}`; `alpha = 0` returns an
    /// identical copy.
    pub fn time_change(&self, alpha: f64) -> Result<Self, PartitionError> {
        if self.alpha != 0.0 {
            return Err(PartitionError::Precondition(format!(
                "time change needs a homogeneous input (alpha = {})",
                self.alpha
            )));
        }
        if !alpha.is_finite() {
            return Err(PartitionError::Precondition(format!("alpha = {alpha} is not finite")));
        }
        let nodes = self.tree.nodes();
        let mut birth = vec![0.0; nodes.len()];
        let mut death = vec![0.0; nodes.len()];
        for (i, u) in nodes.iter().enumerate() {
            birth[i] = u.parent.map_or(0.0, |p| death[p]);
            death[i] = birth[i] + u.mark.lifetime * (-alpha * u.mark.log_size).exp();
        }
        Ok(Self {
            alpha,
            tree: self.tree.clone(),
            left: self.left.clone(),
            birth,
            death,
            tags: self.tags.clone(),
        })
    }

    fn truncation(&self, i: usize, t: f64) -> PartitionError {
        PartitionError::Cascade(CascadeError::FrontierTruncation {
            label: self.tree.label(i),
            death: self.death[i],
            time: t,
        })
    }

    fn check_frontier(&self, t: f64) -> Result<(), PartitionError> {
        match (0..self.tree.len()).find(|&i| self.tree.nodes()[i].children.is_none() && self.death[i] <= t) {
            Some(i) => Err(self.truncation(i, t)),
            None => Ok(()),
        }
    }

    fn alive(&self, i: usize, t: f64) -> bool {
        self.birth[i] <= t && t < self.death[i]
    }

    /// Intervals alive at `t`, sorted by left endpoint.
    pub fn intervals_at(&self, t: f64) -> Result<Vec<(f64, f64)>, PartitionError> {
        self.check_frontier(t)?;
        let mut out: Vec<(f64, f64)> = (0..self.tree.len())
            .filter(|&i| self.alive(i, t))
            .map(|i| self.interval(i))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(out)
    }

    /// Ranked interval lengths at `t`.
    pub fn ranked_lengths(&self, t: f64) -> Result<MassPartition, PartitionError> {
        self.check_frontier(t)?;
        Ok(MassPartition::from_logs_unchecked(
            (0..self.tree.len())
                .filter(|&i| self.alive(i, t))
                .map(|i| self.tree.nodes()[i].mark.log_size)
                .collect(),
        ))
    }

    /// Node whose interval contains `u` at time `t`, `None` in the dust.
    fn containing(&self, u: f64, t: f64) -> Result<Option<usize>, PartitionError> {
        let nodes = self.tree.nodes();
        let mut i = 0;
        loop {
            if t < self.death[i] {
                return Ok(Some(i));
            }
            let Some((a, b)) = nodes[i].children else {
                return Err(self.truncation(i, t));
            };
            match (a..b).find(|&c| {
                let (l, len) = self.interval(c);
                l <= u && u < l + len
            }) {
                Some(c) => i = c,
                None => return Ok(None),
            }
        }
    }

    /// Partition of `{1..n}` induced by the tags at time `t`.
    pub fn partition_at(&self, t: f64) -> Result<PartitionOfN, PartitionError> {
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut blocks = Vec::new();
        for (k, &u) in self.tags.iter().enumerate() {
            match self.containing(u, t)? {
                Some(node) => match groups.iter_mut().find(|g| g.0 == node) {
                    Some(g) => g.1.push(k + 1),
                    None => groups.push((node, vec![k + 1])),
                },
                None => blocks.push(vec![k + 1]),
            }
        }
        blocks.extend(groups.into_iter().map(|g| g.1));
        PartitionOfN::new(self.tags.len(), blocks)
    }

    /// Path of the interval containing tag `k` (1-based), up to `horizon`.
    pub fn tagged_path(&self, k: usize, horizon: f64) -> Result<TaggedPath, PartitionError> {
        let u = *self
            .tags
            .get(k.wrapping_sub(1))
            .ok_or_else(|| PartitionError::Precondition(format!("no tag {k}")))?;
        let mut path = TaggedPath::new(horizon, 0.0);
        let nodes = self.tree.nodes();
        let mut i = 0;
        while self.death[i] <= horizon {
            let Some((a, b)) = nodes[i].children else {
                return Err(self.truncation(i, horizon));
            };
            match (a..b).find(|&c| {
                let (l, len) = self.interval(c);
                l <= u && u < l + len
            }) {
                Some(c) => {
                    path.push(self.death[i], nodes[c].mark.log_size);
                    i = c;
                }
                None => {
                    path.push(self.death[i], f64::NEG_INFINITY);
                    break;
                }
            }
        }
        Ok(path)
    }

    /// `∫_0^T |I_k(v)|^{-α} dv` along tag `k` on a homogeneous fragmentation;
    /// infinite once the tag lies in the dust.
    pub fn tag_clock(&self, k: usize, alpha: f64, homogeneous_time: f64) -> Result<f64, PartitionError> {
        if self.alpha != 0.0 {
            return Err(PartitionError::Precondition("tag clocks are read on a homogeneous fragmentation".into()));
        }
        let path = self.tagged_path(k, homogeneous_time)?;
        let mut total = 0.0;
        let mut from = 0.0;
        let mut log_size = 0.0;
        for &(at, next) in path.jumps() {
            total += (at - from) * (-alpha * log_size).exp();
            if next == f64::NEG_INFINITY {
                return Ok(if homogeneous_time > at { f64::INFINITY } else { total });
            }
            from = at;
            log_size = next;
        }
        Ok(total + (homogeneous_time - from) * (-alpha * log_size).exp())
    }

    /// Every child interval lies inside its parent and siblings are disjoint.
    pub fn is_nested(&self) -> bool {
        let slack = 1e-12;
        self.tree.nodes().iter().enumerate().all(|(i, u)| {
            let Some((a, b)) = u.children else { return true };
            let (l, len) = self.interval(i);
            let mut prev_end = l;
            (a..b).all(|c| {
                let (cl, clen) = self.interval(c);
                let ok = cl >= prev_end - slack && cl + clen <= l + len + slack;
                prev_end = cl + clen;
                ok
            })
        })
    }
}

/// Partitions of `{1..n}` at each of `times` for one replica of `cfg`.
pub fn partition_process(
    cfg: &SimConfig,
    n: usize,
    times: &[f64],
    replica: u64,
) -> Result<Vec<PartitionOfN>, PartitionError> {
    cfg.validate()?;
    let horizon = times.iter().copied().fold(0.0, f64::max);
    let frag = IntervalFragmentation::generate(&cfg.law, cfg.alpha, horizon, n, cfg.seed, replica)?;
    times.iter().map(|&t| frag.partition_at(t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, SimConfig};
    use crate::partition::tagged_path;
    use crate::stats::{chi2_homogeneity, ks_two_sample};
    use std::collections::HashMap;

    #[test]
    fn homogeneous_lengths_equal_engine_snapshots() {
        let law = DislocationLaw::dirichlet(3, 1.0).unwrap();
        let times = [0.5, 1.0, 2.0];
        let cfg = SimConfig::new(law.clone(), 0.0, 2.0).with_snapshots(times.to_vec()).with_seed(17);
        for r in 0..30 {
            let frag = IntervalFragmentation::generate(&law, 0.0, 2.0, 5, 17, r).unwrap();
            let log = run(&cfg, r).unwrap();
            for (snap, &t) in log.snapshots.iter().zip(&times) {
                assert_eq!(frag.ranked_lengths(t).unwrap(), snap.partition);
            }
            assert!(frag.is_nested());
        }
    }

    #[test]
    fn time_change_at_zero_is_identity() {
        let law = DislocationLaw::uniform_binary();
        let frag = IntervalFragmentation::generate(&law, 0.0, 3.0, 8, 4, 2).unwrap();
        assert_eq!(frag.time_change(0.0).unwrap(), frag);
    }

    #[test]
    fn time_change_reproduces_direct_self_similar_slices() {
        let law = DislocationLaw::uniform_binary();
        let t = 1.0;
        let cfg = SimConfig::new(law.clone(), 1.0, t).with_snapshots(vec![t]).with_seed(8);
        for r in 0..50 {
            let changed = IntervalFragmentation::generate(&law, 0.0, t, 0, 8, r)
                .unwrap()
                .time_change(1.0)
                .unwrap();
            let direct = run(&cfg, r).unwrap();
            assert_eq!(changed.ranked_lengths(t).unwrap(), direct.snapshots[0].partition);
        }
    }

    #[test]
    fn time_changed_largest_matches_independent_direct_runs() {
        let law = DislocationLaw::uniform_binary();
        let t = 1.0;
        let n = 2000;
        let changed: Vec<f64> = crate::par::map_replicas(n, |r| {
            IntervalFragmentation::generate(&law, 0.0, t, 0, 100, r as u64)
                .unwrap()
                .time_change(1.0)
                .unwrap()
                .ranked_lengths(t)
                .unwrap()
                .get(1)
        });
        let cfg = SimConfig::new(law.clone(), 1.0, t).with_snapshots(vec![t]).with_seed(200);
        let direct: Vec<f64> = crate::par::map_replicas(n, |r| run(&cfg, r as u64).unwrap().snapshots[0].partition.get(1));
        let rep = ks_two_sample(&changed, &direct, 0.001).unwrap();
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn clocks_increase_and_reproduce_time_changed_births() {
        let law = DislocationLaw::uniform_binary();
        let frag = IntervalFragmentation::generate(&law, 0.0, 4.0, 3, 5, 1).unwrap();
        let mut last = 0.0;
        for i in 1..=40 {
            let c = frag.tag_clock(1, 1.0, i as f64 * 0.1).unwrap();
            assert!(c > last);
            last = c;
        }
        let changed = frag.time_change(1.0).unwrap();
        let homog = frag.tagged_path(1, 4.0).unwrap();
        let path = changed.tagged_path(1, 4.0).unwrap();
        for (h, s) in homog.jumps().iter().zip(path.jumps()) {
            let c = frag.tag_clock(1, 1.0, h.0).unwrap();
            assert!((c - s.0).abs() < 1e-12 * (1.0 + c), "{c} {}", s.0);
            assert_eq!(h.1, s.1);
        }
    }

    #[test]
    fn tree_and_lineage_tagged_paths_agree() {
        let law = DislocationLaw::lossy_binary();
        let cfg = SimConfig::new(law.clone(), 0.0, 3.0).with_seed(6);
        for r in 0..100 {
            let frag = IntervalFragmentation::generate(&law, 0.0, 3.0, 1, 6, r).unwrap();
            let a = frag.tagged_path(1, 3.0).unwrap();
            let b = tagged_path(&cfg, 3.0, r).unwrap();
            assert_eq!(a.jumps().len(), b.jumps().len());
            for (x, y) in a.jumps().iter().zip(b.jumps()) {
                assert_eq!(x.0, y.0);
                assert_eq!(x.1, y.1);
            }
        }
    }

    #[test]
    fn partitions_refine_over_time() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.5, 2.0).with_seed(3);
        for r in 0..20 {
            let ps = partition_process(&cfg, 12, &[0.0, 0.5, 1.0, 2.0], r).unwrap();
            assert_eq!(ps[0], PartitionOfN::single_block(12));
            for w in ps.windows(2) {
                assert!(w[1].refines(&w[0]));
            }
        }
    }

    #[test]
    fn three_point_partitions_are_exchangeable() {
        let cfg = SimConfig::new(DislocationLaw::uniform_binary(), 0.0, 1.0).with_seed(12);
        let n = 6000;
        let parts: Vec<PartitionOfN> = crate::par::map_replicas(n, |r| partition_process(&cfg, 3, &[1.0], r as u64).unwrap().remove(0));
        let mut a: HashMap<String, u64> = HashMap::new();
        let mut b: HashMap<String, u64> = HashMap::new();
        for p in &parts {
            *a.entry(p.to_string()).or_default() += 1;
            *b.entry(p.relabel(&[2, 3, 1]).to_string()).or_default() += 1;
        }
        let keys = ["{1,2,3}", "{1,2|3}", "{1,3|2}", "{1|2,3}", "{1|2|3}"];
        let ca: Vec<u64> = keys.iter().map(|k| a.get(*k).copied().unwrap_or(0)).collect();
        let cb: Vec<u64> = keys.iter().map(|k| b.get(*k).copied().unwrap_or(0)).collect();
        let rep = chi2_homogeneity(&ca, &cb, 0.001).unwrap();
        assert!(rep.pass, "{rep:?} {ca:?} {cb:?}");
    }
}
