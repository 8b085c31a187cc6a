//! Ulam–Harris node labels, tree marks and the per-node stream keys.

use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

/// Address of a node in the genealogical tree; the empty path is the root.
///
/// Children are numbered from 1 in ranked order of their sizes, so the
/// derived ordering is the lexicographic one used for tie-breaking.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct NodeLabel(Vec<u32>);

impl NodeLabel {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn from_path(path: Vec<u32>) -> Self {
        debug_assert!(path.iter().all(|&i| i >= 1));
        Self(path)
    }

    pub fn path(&self) -> &[u32] {
        &self.0
    }

    pub fn generation(&self) -> usize {
        self.0.len()
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn parent(&self) -> Option<Self> {
        if self.0.is_empty() {
            None
        } else {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, index: u32) -> Self {
        assert!(index >= 1, "children are numbered from 1");
        let mut path = self.0.clone();
        path.push(index);
        Self(path)
    }

    /// Key of the randomness stream attached to this node.
    pub fn stream_key(&self) -> u64 {
        self.0.iter().fold(ROOT_KEY, |k, &i| child_key(k, i))
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("r")?;
        for i in &self.0 {
            write!(f, ".{i}")?;
        }
        Ok(())
    }
}

pub const ROOT_KEY: u64 = 0x6a09_e667_f3bc_c908;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream key of child `index` given the parent's key.
pub fn child_key(parent: u64, index: u32) -> u64 {
    mix64(parent.rotate_left(23) ^ (u64::from(index)).wrapping_mul(0xd605_bbb5_8c8a_bd3d))
}

/// Persistent parent-linked label used inside simulations, where building a
/// full path for every node would be wasteful.
#[derive(Debug, Clone)]
pub struct Lineage(Rc<LineageNode>);

#[derive(Debug)]
struct LineageNode {
    parent: Option<Lineage>,
    index: u32,
    generation: u32,
    key: u64,
}

impl Lineage {
    pub fn root() -> Self {
        Self(Rc::new(LineageNode {
            parent: None,
            index: 0,
            generation: 0,
            key: ROOT_KEY,
        }))
    }

    pub fn child(&self, index: u32) -> Self {
        Self(Rc::new(LineageNode {
            parent: Some(self.clone()),
            index,
            generation: self.0.generation + 1,
            key: child_key(self.0.key, index),
        }))
    }

    pub fn key(&self) -> u64 {
        self.0.key
    }

    pub fn generation(&self) -> u32 {
        self.0.generation
    }

    pub fn to_label(&self) -> NodeLabel {
        let mut path = Vec::with_capacity(self.0.generation as usize);
        let mut cur = Some(self);
        while let Some(node) = cur {
            if node.0.parent.is_some() {
                path.push(node.0.index);
            }
            cur = node.0.parent.as_ref();
        }
        path.reverse();
        NodeLabel(path)
    }
}

/// The mark `(log xi_u, a_u, zeta_u)` carried by a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeMark {
    /// Natural log of the fragment size.
    pub log_size: f64,
    /// Birth time.
    pub birth: f64,
    /// Lifetime; the node dies at `birth + lifetime`.
    pub lifetime: f64,
}

impl TreeMark {
    pub fn death(&self) -> f64 {
        self.birth + self.lifetime
    }

    /// Birth time in the general-branching view, `-log xi_u`.
    pub fn log_birth(&self) -> f64 {
        -self.log_size
    }

    pub fn is_alive(&self, t: f64) -> bool {
        self.birth <= t && t < self.death()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parent_child_algebra() {
        let root = NodeLabel::root();
        assert_eq!(root.generation(), 0);
        assert!(root.parent().is_none());
        let u = root.child(2).child(1);
        assert_eq!(u.path(), &[2, 1]);
        assert_eq!(u.generation(), 2);
        assert_eq!(u.parent().unwrap(), root.child(2));
        assert_eq!(u.to_string(), "r.2.1");
        assert!(root.child(1).child(5) < root.child(2));
    }

    #[test]
    fn lineage_matches_label() {
        let l = Lineage::root().child(3).child(1).child(2);
        let label = l.to_label();
        assert_eq!(label.path(), &[3, 1, 2]);
        assert_eq!(l.key(), label.stream_key());
        assert_eq!(l.generation(), 3);
        assert_eq!(Lineage::root().to_label(), NodeLabel::root());
    }

    #[test]
    fn sibling_keys_differ() {
        let keys: std::collections::HashSet<u64> = (1..1000).map(|i| child_key(ROOT_KEY, i)).collect();
        assert_eq!(keys.len(), 999);
    }
}
