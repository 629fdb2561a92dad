//! Task synthesis: superclass enumeration, subpopulation sampling and
//! source/target splits.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{HierarchyError, NodeId, Tree};
use crate::rng::Stream;

pub mod study;

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),
    #[error("no superclass under {root} at level {level} has at least {k} leaves")]
    EmptyResult { root: NodeId, level: usize, k: usize },
    #[error("{node}: need {k} leaves, have {have}")]
    InsufficientLeaves { node: NodeId, k: usize, have: usize },
    #[error("cannot split an odd number ({0}) of subpopulations")]
    OddCount(usize),
    #[error("invalid task spec: {0}")]
    InvalidSpec(String),
    #[error("task invariant violated: {0}")]
    Invariant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitStrategy {
    Rand,
    Good,
    Bad,
}

impl FromStr for SplitStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rand" => Ok(SplitStrategy::Rand),
            "good" => Ok(SplitStrategy::Good),
            "bad" => Ok(SplitStrategy::Bad),
            _ => Err(format!("unknown split strategy {s:?}")),
        }
    }
}

impl fmt::Display for SplitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitStrategy::Rand => "rand",
            SplitStrategy::Good => "good",
            SplitStrategy::Bad => "bad",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

impl FromStr for Domain {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "source" => Ok(Domain::Source),
            "target" => Ok(Domain::Target),
            _ => Err(format!("unknown domain {s:?}")),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Source => "source",
            Domain::Target => "target",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub subtree_root: NodeId,
    pub level: usize,
    pub subpops_per_superclass: usize,
    pub split_strategy: SplitStrategy,
    pub seed: u64,
}

impl TaskSpec {
    pub fn check(&self) -> Result<(), TaskError> {
        if self.level < 1 {
            return Err(TaskError::InvalidSpec("level must be at least 1".into()));
        }
        let k = self.subpops_per_superclass;
        if k < 2 || !k.is_multiple_of(2) {
            return Err(TaskError::InvalidSpec(format!(
                "subpopulations per superclass must be even and at least 2, got {k}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Superclass {
    pub node: NodeId,
    #[serde(rename = "name")]
    pub display_name: String,
    #[serde(rename = "source")]
    pub source_subpops: Vec<NodeId>,
    #[serde(rename = "target")]
    pub target_subpops: Vec<NodeId>,
}

impl Superclass {
    pub fn subpops(&self, d: Domain) -> &[NodeId] {
        match d {
            Domain::Source => &self.source_subpops,
            Domain::Target => &self.target_subpops,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDefinition {
    #[serde(flatten)]
    pub spec: TaskSpec,
    pub hierarchy_hash: String,
    pub superclasses: Vec<Superclass>,
}

impl TaskDefinition {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("task serializes");
        s.push('\n');
        s
    }

    pub fn num_classes(&self) -> usize {
        self.superclasses.len()
    }

    /// Swap every source and target list.
    pub fn swapped(&self) -> TaskDefinition {
        let mut t = self.clone();
        for s in &mut t.superclasses {
            std::mem::swap(&mut s.source_subpops, &mut s.target_subpops);
        }
        t
    }

    /// Balance, disjointness, leaves-under-superclass, distinct superclasses
    /// and canonical superclass order.
    pub fn check_invariants(&self, tree: &Tree) -> Result<(), TaskError> {
        let bad = |m: String| Err(TaskError::Invariant(m));
        self.spec.check()?;
        let half = self.spec.subpops_per_superclass / 2;
        let mut nodes = BTreeSet::new();
        let mut all = BTreeSet::new();
        let mut prev_pos = None;
        for s in &self.superclasses {
            if !nodes.insert(&s.node) {
                return bad(format!("superclass {} listed twice", s.node));
            }
            let Some(pos) = tree.dfs_position(s.node.as_str()) else {
                return bad(format!("superclass {} not in hierarchy", s.node));
            };
            if prev_pos.is_some_and(|p| p >= pos) {
                return bad(format!("superclass {} out of canonical order", s.node));
            }
            prev_pos = Some(pos);
            if s.source_subpops.len() != half || s.target_subpops.len() != half {
                return bad(format!(
                    "{}: {} source / {} target, expected {half} each",
                    s.node,
                    s.source_subpops.len(),
                    s.target_subpops.len()
                ));
            }
            for leaf in s.source_subpops.iter().chain(&s.target_subpops) {
                if !tree.graph().is_leaf_class(leaf.as_str()) {
                    return bad(format!("{leaf} is not a leaf class"));
                }
                if !tree.is_ancestor_or_self(s.node.as_str(), leaf.as_str()) {
                    return bad(format!("{leaf} is not under {}", s.node));
                }
                if !all.insert(leaf) {
                    return bad(format!("{leaf} assigned twice"));
                }
            }
        }
        Ok(())
    }
}

/// Nodes `level` below the subtree root with at least `k` leaves, each with
/// its leaf set in canonical DFS order.
pub fn enumerate_superclasses(
    tree: &Tree,
    spec: &TaskSpec,
) -> Result<Vec<(NodeId, Vec<NodeId>)>, TaskError> {
    let k = spec.subpops_per_superclass;
    let mut out = Vec::new();
    for n in tree.nodes_at_level(spec.subtree_root.as_str(), spec.level)? {
        let leaves = tree.leaves_under_dfs(n.as_str())?;
        if leaves.len() >= k {
            out.push((n, leaves));
        }
    }
    if out.is_empty() {
        return Err(TaskError::EmptyResult {
            root: spec.subtree_root.clone(),
            level: spec.level,
            k,
        });
    }
    Ok(out)
}

/// Pick `k` leaves uniformly without replacement from the id-sorted leaf
/// list; the result is returned in canonical DFS order.
pub fn sample_subpopulations(
    tree: &Tree,
    node: &NodeId,
    leaves: &[NodeId],
    k: usize,
    rng: &mut Stream,
) -> Result<Vec<NodeId>, TaskError> {
    if leaves.len() < k {
        return Err(TaskError::InsufficientLeaves {
            node: node.clone(),
            k,
            have: leaves.len(),
        });
    }
    let mut sorted = leaves.to_vec();
    sorted.sort();
    let mut picked: Vec<NodeId> = rng
        .choose_indices(sorted.len(), k)
        .into_iter()
        .map(|i| sorted[i].clone())
        .collect();
    tree.sort_dfs(&mut picked);
    Ok(picked)
}

/// Partition sampled leaves into (source, target) halves.
pub fn split_subpopulations(
    tree: &Tree,
    sampled: &[NodeId],
    strategy: SplitStrategy,
    rng: &mut Stream,
) -> Result<(Vec<NodeId>, Vec<NodeId>), TaskError> {
    if !sampled.len().is_multiple_of(2) {
        return Err(TaskError::OddCount(sampled.len()));
    }
    let mut ordered = sampled.to_vec();
    tree.sort_dfs(&mut ordered);
    let half = ordered.len() / 2;
    let (mut src, mut tgt) = match strategy {
        SplitStrategy::Rand => {
            let mut sorted = sampled.to_vec();
            sorted.sort();
            rng.shuffle(&mut sorted);
            let tgt = sorted.split_off(half);
            (sorted, tgt)
        }
        SplitStrategy::Good => {
            let mut src = Vec::with_capacity(half);
            let mut tgt = Vec::with_capacity(half);
            for (i, x) in ordered.into_iter().enumerate() {
                if i % 2 == 0 {
                    src.push(x);
                } else {
                    tgt.push(x);
                }
            }
            (src, tgt)
        }
        SplitStrategy::Bad => {
            let tgt = ordered.split_off(half);
            (ordered, tgt)
        }
    };
    tree.sort_dfs(&mut src);
    tree.sort_dfs(&mut tgt);
    Ok((src, tgt))
}

fn build_superclass(
    tree: &Tree,
    spec: &TaskSpec,
    node: &NodeId,
    leaves: &[NodeId],
) -> Result<Superclass, TaskError> {
    let mut rng = Stream::keyed(spec.seed, "superclass", node.as_str());
    let sampled = sample_subpopulations(tree, node, leaves, spec.subpops_per_superclass, &mut rng)?;
    let (source, target) = split_subpopulations(tree, &sampled, spec.split_strategy, &mut rng)?;
    Ok(Superclass {
        node: node.clone(),
        display_name: tree.graph().name(node.as_str()).to_string(),
        source_subpops: source,
        target_subpops: target,
    })
}

/// Build a task, evaluating superclasses in parallel.
pub fn make_task(tree: &Tree, spec: &TaskSpec) -> Result<TaskDefinition, TaskError> {
    make_task_with(tree, spec, true)
}

pub fn make_task_with(
    tree: &Tree,
    spec: &TaskSpec,
    parallel: bool,
) -> Result<TaskDefinition, TaskError> {
    spec.check()?;
    let found = enumerate_superclasses(tree, spec)?;
    let superclasses: Result<Vec<Superclass>, TaskError> = if parallel {
        found
            .par_iter()
            .map(|(n, l)| build_superclass(tree, spec, n, l))
            .collect()
    } else {
        found
            .iter()
            .map(|(n, l)| build_superclass(tree, spec, n, l))
            .collect()
    };
    Ok(TaskDefinition {
        spec: spec.clone(),
        hierarchy_hash: tree.graph().content_hash(),
        superclasses: superclasses?,
    })
}

/// The four named benchmarks over the shipped hierarchy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Entity13,
    Entity30,
    Living17,
    Nonliving26,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::Entity13,
        Preset::Entity30,
        Preset::Living17,
        Preset::Nonliving26,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Preset::Entity13 => "entity13",
            Preset::Entity30 => "entity30",
            Preset::Living17 => "living17",
            Preset::Nonliving26 => "nonliving26",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Preset::Entity13 => "ENTITY-13",
            Preset::Entity30 => "ENTITY-30",
            Preset::Living17 => "LIVING-17",
            Preset::Nonliving26 => "NONLIVING-26",
        }
    }

    /// (subtree root, level, subpopulations per superclass)
    pub fn params(self) -> (&'static str, usize, usize) {
        match self {
            Preset::Entity13 => (crate::fixtures::ENTITY, 3, 20),
            Preset::Entity30 => (crate::fixtures::ENTITY, 4, 8),
            Preset::Living17 => (crate::fixtures::LIVING_THING, 5, 4),
            Preset::Nonliving26 => (crate::fixtures::NON_LIVING_THING, 5, 4),
        }
    }

    pub fn expected_superclasses(self) -> usize {
        match self {
            Preset::Entity13 => 13,
            Preset::Entity30 => 30,
            Preset::Living17 => 17,
            Preset::Nonliving26 => 26,
        }
    }

    pub fn spec(self, split: SplitStrategy, seed: u64) -> TaskSpec {
        let (root, level, k) = self.params();
        TaskSpec {
            name: self.title().to_string(),
            subtree_root: NodeId::new(root).expect("preset root"),
            level,
            subpops_per_superclass: k,
            split_strategy: split,
            seed,
        }
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.key() == s)
            .ok_or_else(|| format!("unknown preset {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{nid, parse_edges};

    // s has children A{a1,a2} and B{b1,b2}
    fn two_subtrees() -> Tree {
        Tree::new(parse_edges("r s\ns A\ns B\nA a1\nA a2\nB b1\nB b2\nr t\nt t1\nt t2").unwrap())
            .unwrap()
    }

    fn ids(xs: &[&str]) -> Vec<NodeId> {
        xs.iter().map(|s| nid(s)).collect()
    }

    #[test]
    fn bad_split_hand_trace() {
        let t = two_subtrees();
        let mut rng = Stream::indexed(0, "t", 0);
        let (s, g) =
            split_subpopulations(&t, &ids(&["b2", "a1", "b1", "a2"]), SplitStrategy::Bad, &mut rng)
                .unwrap();
        assert_eq!(s, ids(&["a1", "a2"]));
        assert_eq!(g, ids(&["b1", "b2"]));
    }

    #[test]
    fn good_split_hand_trace() {
        let t = two_subtrees();
        let mut rng = Stream::indexed(0, "t", 0);
        let (s, g) =
            split_subpopulations(&t, &ids(&["a1", "a2", "b1", "b2"]), SplitStrategy::Good, &mut rng)
                .unwrap();
        assert_eq!(s, ids(&["a1", "b1"]));
        assert_eq!(g, ids(&["a2", "b2"]));
    }

    #[test]
    fn odd_split_rejected() {
        let t = two_subtrees();
        let mut rng = Stream::indexed(0, "t", 0);
        assert_eq!(
            split_subpopulations(&t, &ids(&["a1"]), SplitStrategy::Rand, &mut rng),
            Err(TaskError::OddCount(1))
        );
    }

    #[test]
    fn enumerate_filters_by_leaf_count() {
        let t = two_subtrees();
        let spec = |k| TaskSpec {
            name: "t".into(),
            subtree_root: nid("r"),
            level: 2,
            subpops_per_superclass: k,
            split_strategy: SplitStrategy::Rand,
            seed: 0,
        };
        let got = enumerate_superclasses(&t, &spec(2)).unwrap();
        let nodes: Vec<&str> = got.iter().map(|(n, _)| n.as_str()).collect();
        // t1 and t2 sit at level 2 too but hold a single leaf each
        assert_eq!(nodes, vec!["A", "B"]);
        assert!(matches!(
            enumerate_superclasses(&t, &spec(4)),
            Err(TaskError::EmptyResult { .. })
        ));
    }

    #[test]
    fn sample_whole_set() {
        let t = two_subtrees();
        let leaves = ids(&["a1", "a2", "b1", "b2"]);
        let mut rng = Stream::indexed(0, "t", 0);
        assert_eq!(sample_subpopulations(&t, &nid("s"), &leaves, 4, &mut rng).unwrap(), leaves);
        assert!(matches!(
            sample_subpopulations(&t, &nid("s"), &leaves, 6, &mut rng),
            Err(TaskError::InsufficientLeaves { have: 4, .. })
        ));
    }

    #[test]
    fn spec_checks() {
        let mut s = Preset::Living17.spec(SplitStrategy::Rand, 0);
        assert!(s.check().is_ok());
        s.subpops_per_superclass = 3;
        assert!(s.check().is_err());
        s.subpops_per_superclass = 4;
        s.level = 0;
        assert!(s.check().is_err());
    }

    #[test]
    fn json_field_order() {
        let t = TaskDefinition {
            spec: Preset::Living17.spec(SplitStrategy::Good, 9),
            hierarchy_hash: "h".into(),
            superclasses: vec![],
        };
        let j = t.to_json();
        let keys = [
            "\"name\"",
            "\"subtree_root\"",
            "\"level\"",
            "\"subpops_per_superclass\"",
            "\"split_strategy\": \"good\"",
            "\"seed\"",
            "\"hierarchy_hash\"",
            "\"superclasses\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| j.find(k).expect(k)).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{j}");
        assert_eq!(TaskDefinition::from_json(&j).unwrap(), t);
    }
}
