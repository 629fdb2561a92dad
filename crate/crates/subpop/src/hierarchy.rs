//! Class hierarchy: parsing, validation and tree queries.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HierarchyError {
    #[error("line {0}: malformed line")]
    MalformedLine(usize),
    #[error("line {line}: duplicate edge {parent} -> {child}")]
    DuplicateEdge {
        line: usize,
        parent: NodeId,
        child: NodeId,
    },
    #[error("expected exactly one parentless node, found {0:?}")]
    NoUniqueRoot(Vec<NodeId>),
    #[error("invalid node id {0:?}")]
    InvalidId(String),
    #[error("node {0} not found")]
    NodeNotFound(NodeId),
    #[error("graph is not a tree: {0}")]
    NotATree(ValidationReport),
    #[error("class table: {0}")]
    ClassTable(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NodeId(String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Result<Self, HierarchyError> {
        let s = s.into();
        if s.is_empty() || s.chars().any(char::is_whitespace) {
            return Err(HierarchyError::InvalidId(s));
        }
        Ok(NodeId(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for NodeId {
    type Error = HierarchyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        NodeId::new(s)
    }
}

impl From<NodeId> for String {
    fn from(n: NodeId) -> String {
        n.0
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl std::ops::Deref for NodeId {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Shorthand for tests and fixtures. Panics on an invalid id.
pub fn nid(s: &str) -> NodeId {
    NodeId::new(s).expect("valid node id")
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// A possibly multi-parent class graph.
///
/// Leaf classes come from a bound [`DatasetClassTable`]; until one is bound
/// they are inferred as the nodes without children.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyGraph {
    nodes: BTreeSet<NodeId>,
    children: BTreeMap<NodeId, BTreeSet<NodeId>>,
    parents: BTreeMap<NodeId, BTreeSet<NodeId>>,
    names: BTreeMap<NodeId, String>,
    root: NodeId,
    declared_classes: Option<BTreeSet<NodeId>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub multi_parent_nodes: Vec<(NodeId, Vec<NodeId>)>,
    pub cycle_witness: Option<Vec<(NodeId, NodeId)>>,
    pub unreachable: Vec<NodeId>,
    /// Childless nodes that are not declared dataset classes.
    pub orphan_leaves: Vec<NodeId>,
    /// Declared dataset classes that have children.
    pub interior_classes: Vec<NodeId>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.multi_parent_nodes.is_empty()
            && self.cycle_witness.is_none()
            && self.unreachable.is_empty()
            && self.orphan_leaves.is_empty()
            && self.interior_classes.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("ok");
        }
        let mut parts = Vec::new();
        if !self.multi_parent_nodes.is_empty() {
            parts.push(format!("{} multi-parent nodes", self.multi_parent_nodes.len()));
        }
        if self.cycle_witness.is_some() {
            parts.push("cycle".to_string());
        }
        if !self.unreachable.is_empty() {
            parts.push(format!("{} unreachable", self.unreachable.len()));
        }
        if !self.orphan_leaves.is_empty() {
            parts.push(format!("{} orphan leaves", self.orphan_leaves.len()));
        }
        if !self.interior_classes.is_empty() {
            parts.push(format!("{} classes with children", self.interior_classes.len()));
        }
        f.write_str(&parts.join(", "))
    }
}

pub fn parse_edges(text: &str) -> Result<HierarchyGraph, HierarchyError> {
    let mut edges = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, l) in content_lines(text) {
        let mut it = l.split(' ');
        let (p, c) = match (it.next(), it.next(), it.next()) {
            (Some(p), Some(c), None) if !p.is_empty() && !c.is_empty() => (p, c),
            _ => return Err(HierarchyError::MalformedLine(line)),
        };
        let p = NodeId::new(p).map_err(|_| HierarchyError::MalformedLine(line))?;
        let c = NodeId::new(c).map_err(|_| HierarchyError::MalformedLine(line))?;
        if !seen.insert((p.clone(), c.clone())) {
            return Err(HierarchyError::DuplicateEdge {
                line,
                parent: p,
                child: c,
            });
        }
        edges.push((p, c));
    }
    HierarchyGraph::from_edges(edges)
}

pub fn parse_names(text: &str) -> Result<BTreeMap<NodeId, String>, HierarchyError> {
    let mut out = BTreeMap::new();
    for (line, l) in content_lines(text) {
        let (id, name) = l.split_once('\t').ok_or(HierarchyError::MalformedLine(line))?;
        let id = NodeId::new(id).map_err(|_| HierarchyError::MalformedLine(line))?;
        out.insert(id, name.to_string());
    }
    Ok(out)
}

impl HierarchyGraph {
    /// Build from an edge list; the root is the unique parentless node.
    pub fn from_edges(
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, HierarchyError> {
        let mut nodes = BTreeSet::new();
        let mut children: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        let mut parents: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for (p, c) in edges {
            nodes.insert(p.clone());
            nodes.insert(c.clone());
            children.entry(p.clone()).or_default().insert(c.clone());
            parents.entry(c).or_default().insert(p);
        }
        let roots: Vec<NodeId> = nodes
            .iter()
            .filter(|n| !parents.contains_key(*n))
            .cloned()
            .collect();
        if roots.len() != 1 {
            return Err(HierarchyError::NoUniqueRoot(roots));
        }
        Ok(HierarchyGraph {
            nodes,
            children,
            parents,
            names: BTreeMap::new(),
            root: roots.into_iter().next().unwrap(),
            declared_classes: None,
        })
    }

    /// A graph with a single node and no edges.
    pub fn singleton(root: NodeId) -> Self {
        HierarchyGraph {
            nodes: BTreeSet::from([root.clone()]),
            children: BTreeMap::new(),
            parents: BTreeMap::new(),
            names: BTreeMap::new(),
            root,
            declared_classes: None,
        }
    }

    /// Attach display names. Entries for unknown nodes are ignored.
    pub fn with_names(mut self, names: BTreeMap<NodeId, String>) -> Self {
        self.names = names
            .into_iter()
            .filter(|(k, _)| self.nodes.contains(k))
            .collect();
        self
    }

    /// Declare the dataset classes. Every class must be a node of the graph.
    pub fn bind_classes(mut self, table: &DatasetClassTable) -> Result<Self, HierarchyError> {
        let mut set = BTreeSet::new();
        for e in &table.entries {
            if !self.nodes.contains(&e.node) {
                return Err(HierarchyError::ClassTable(format!(
                    "class {} ({}) is not in the hierarchy",
                    e.class_index, e.node
                )));
            }
            set.insert(e.node.clone());
        }
        self.declared_classes = Some(set);
        Ok(self)
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn contains(&self, n: &str) -> bool {
        self.nodes.contains(n)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.children
            .iter()
            .flat_map(|(p, cs)| cs.iter().map(move |c| (p, c)))
    }

    pub fn edge_count(&self) -> usize {
        self.children.values().map(BTreeSet::len).sum()
    }

    pub fn has_edge(&self, p: &str, c: &str) -> bool {
        self.children.get(p).is_some_and(|cs| cs.contains(c))
    }

    pub fn children(&self, n: &str) -> impl Iterator<Item = &NodeId> {
        self.children.get(n).into_iter().flatten()
    }

    pub fn parents(&self, n: &str) -> impl Iterator<Item = &NodeId> {
        self.parents.get(n).into_iter().flatten()
    }

    pub fn names(&self) -> &BTreeMap<NodeId, String> {
        &self.names
    }

    /// Display name, falling back to the id.
    pub fn name<'a>(&'a self, n: &'a str) -> &'a str {
        match self.names.get(n) {
            Some(s) => s,
            None => n,
        }
    }

    pub fn classes_declared(&self) -> bool {
        self.declared_classes.is_some()
    }

    pub fn leaf_classes(&self) -> BTreeSet<NodeId> {
        match &self.declared_classes {
            Some(s) => s.clone(),
            None => self
                .nodes
                .iter()
                .filter(|n| !self.children.contains_key(*n))
                .cloned()
                .collect(),
        }
    }

    pub fn is_leaf_class(&self, n: &str) -> bool {
        match &self.declared_classes {
            Some(s) => s.contains(n),
            None => self.nodes.contains(n) && !self.children.contains_key(n),
        }
    }

    fn require(&self, n: &str) -> Result<(), HierarchyError> {
        if self.nodes.contains(n) {
            Ok(())
        } else {
            Err(HierarchyError::NodeNotFound(
                NodeId::new(n).unwrap_or_else(|_| NodeId(n.to_string())),
            ))
        }
    }

    /// Leaf classes reachable from `n` (works on DAGs).
    pub fn leaves_under(&self, n: &str) -> Result<BTreeSet<NodeId>, HierarchyError> {
        self.require(n)?;
        let mut out = BTreeSet::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.nodes.get(n).unwrap()];
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            if self.is_leaf_class(x) {
                out.insert(x.clone());
            }
            stack.extend(self.children(x));
        }
        Ok(out)
    }

    pub fn validate(&self) -> ValidationReport {
        let multi_parent_nodes = self
            .parents
            .iter()
            .filter(|(_, ps)| ps.len() >= 2)
            .map(|(c, ps)| (c.clone(), ps.iter().cloned().collect()))
            .collect();

        let mut reached = BTreeSet::new();
        let mut stack = vec![&self.root];
        while let Some(x) = stack.pop() {
            if reached.insert(x) {
                stack.extend(self.children(x));
            }
        }
        let unreachable = self
            .nodes
            .iter()
            .filter(|n| !reached.contains(n))
            .cloned()
            .collect();

        let (orphan_leaves, interior_classes) = match &self.declared_classes {
            Some(classes) => (
                self.nodes
                    .iter()
                    .filter(|n| !self.children.contains_key(*n) && !classes.contains(*n))
                    .cloned()
                    .collect(),
                classes
                    .iter()
                    .filter(|n| self.children.contains_key(*n))
                    .cloned()
                    .collect(),
            ),
            None => (Vec::new(), Vec::new()),
        };

        ValidationReport {
            multi_parent_nodes,
            cycle_witness: self.find_cycle(),
            unreachable,
            orphan_leaves,
            interior_classes,
        }
    }

    /// Iterative three-colour DFS; returns the edges of one directed cycle.
    fn find_cycle(&self) -> Option<Vec<(NodeId, NodeId)>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut mark: HashMap<&NodeId, Mark> = HashMap::new();
        for start in &self.nodes {
            if mark.contains_key(start) {
                continue;
            }
            let mut path: Vec<&NodeId> = vec![start];
            let mut iters = vec![self.children(start)];
            mark.insert(start, Mark::Open);
            while let Some(it) = iters.last_mut() {
                match it.next() {
                    Some(c) => match mark.get(c) {
                        Some(Mark::Open) => {
                            let pos = path.iter().position(|x| *x == c).unwrap();
                            let mut cyc: Vec<(NodeId, NodeId)> = path[pos..]
                                .windows(2)
                                .map(|w| (w[0].clone(), w[1].clone()))
                                .collect();
                            cyc.push(((*path.last().unwrap()).clone(), c.clone()));
                            return Some(cyc);
                        }
                        Some(Mark::Done) => {}
                        None => {
                            mark.insert(c, Mark::Open);
                            path.push(c);
                            iters.push(self.children(c));
                        }
                    },
                    None => {
                        let done = path.pop().unwrap();
                        mark.insert(done, Mark::Done);
                        iters.pop();
                    }
                }
            }
        }
        None
    }

    /// Edge-file text, edges in sorted order.
    pub fn to_edge_text(&self) -> String {
        let mut s = String::new();
        for (p, c) in self.edges() {
            s.push_str(p.as_str());
            s.push(' ');
            s.push_str(c.as_str());
            s.push('\n');
        }
        s
    }

    pub fn to_names_text(&self) -> String {
        let mut s = String::new();
        for (n, name) in &self.names {
            s.push_str(n.as_str());
            s.push('\t');
            s.push_str(name);
            s.push('\n');
        }
        s
    }

    /// Hex SHA-256 of [`to_edge_text`](Self::to_edge_text).
    pub fn content_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_edge_text().as_bytes()))
    }

    // --- mutation, used by calibration ---

    pub(crate) fn insert_node(&mut self, n: NodeId, name: Option<String>) {
        if let Some(name) = name {
            self.names.insert(n.clone(), name);
        }
        self.nodes.insert(n);
    }

    pub(crate) fn insert_edge(&mut self, p: &NodeId, c: &NodeId) -> bool {
        let fresh = self.children.entry(p.clone()).or_default().insert(c.clone());
        self.parents.entry(c.clone()).or_default().insert(p.clone());
        fresh
    }

    pub(crate) fn remove_edge(&mut self, p: &NodeId, c: &NodeId) {
        if let Some(cs) = self.children.get_mut(p) {
            cs.remove(c);
            if cs.is_empty() {
                self.children.remove(p);
            }
        }
        if let Some(ps) = self.parents.get_mut(c) {
            ps.remove(p);
            if ps.is_empty() {
                self.parents.remove(c);
            }
        }
    }

    /// Remove `n` and its incident edges; returns its former (parents, children).
    pub(crate) fn remove_node(&mut self, n: &NodeId) -> (Vec<NodeId>, Vec<NodeId>) {
        let ps: Vec<NodeId> = self.parents(n).cloned().collect();
        let cs: Vec<NodeId> = self.children(n).cloned().collect();
        for p in &ps {
            self.remove_edge(p, n);
        }
        for c in &cs {
            self.remove_edge(n, c);
        }
        self.nodes.remove(n);
        self.names.remove(n);
        if let Some(d) = &mut self.declared_classes {
            d.remove(n);
        }
        (ps, cs)
    }

    pub(crate) fn set_root(&mut self, n: NodeId) {
        self.root = n;
    }
}

/// A validated tree with precomputed depth and canonical DFS order.
#[derive(Clone, Debug)]
pub struct Tree {
    graph: HierarchyGraph,
    parent: HashMap<NodeId, NodeId>,
    depth: HashMap<NodeId, usize>,
    dfs_pos: HashMap<NodeId, usize>,
    dfs: Vec<NodeId>,
}

impl Tree {
    /// Fails with the validation report unless every node has one parent,
    /// there are no cycles and all nodes are reachable.
    pub fn new(graph: HierarchyGraph) -> Result<Self, HierarchyError> {
        let mut report = graph.validate();
        // orphan and class-placement findings do not affect tree shape
        report.orphan_leaves.clear();
        report.interior_classes.clear();
        if !report.is_empty() {
            return Err(HierarchyError::NotATree(report));
        }
        let mut parent = HashMap::new();
        for (p, c) in graph.edges() {
            parent.insert(c.clone(), p.clone());
        }
        let mut depth = HashMap::new();
        let mut dfs = Vec::with_capacity(graph.nodes.len());
        let mut stack = vec![(graph.root.clone(), 0usize)];
        while let Some((x, d)) = stack.pop() {
            // push in reverse so the lexicographically smallest child is visited first
            let kids: Vec<&NodeId> = graph.children(&x).collect();
            for c in kids.into_iter().rev() {
                stack.push((c.clone(), d + 1));
            }
            depth.insert(x.clone(), d);
            dfs.push(x);
        }
        let dfs_pos = dfs.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(Tree {
            graph,
            parent,
            depth,
            dfs_pos,
            dfs,
        })
    }

    pub fn graph(&self) -> &HierarchyGraph {
        &self.graph
    }

    pub fn root(&self) -> &NodeId {
        &self.graph.root
    }

    pub fn parent(&self, n: &str) -> Option<&NodeId> {
        self.parent.get(n)
    }

    pub fn depth_of(&self, n: &str) -> Result<usize, HierarchyError> {
        self.graph.require(n)?;
        Ok(self.depth[n])
    }

    /// Position of `n` in the canonical DFS order.
    pub fn dfs_position(&self, n: &str) -> Option<usize> {
        self.dfs_pos.get(n).copied()
    }

    /// All nodes in canonical DFS order (children visited in id order).
    pub fn dfs_order(&self) -> &[NodeId] {
        &self.dfs
    }

    /// Sort node ids into canonical DFS order.
    pub fn sort_dfs(&self, xs: &mut [NodeId]) {
        xs.sort_by_key(|n| self.dfs_pos.get(n).copied().unwrap_or(usize::MAX));
    }

    /// True if `anc` is `n` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, anc: &str, n: &str) -> bool {
        let mut cur = self.dfs_pos.get_key_value(n).map(|(k, _)| k);
        while let Some(x) = cur {
            if x.as_str() == anc {
                return true;
            }
            cur = self.parent.get(x);
        }
        false
    }

    pub fn leaves_under(&self, n: &str) -> Result<BTreeSet<NodeId>, HierarchyError> {
        self.graph.leaves_under(n)
    }

    /// Leaf classes under `n` in canonical DFS order.
    pub fn leaves_under_dfs(&self, n: &str) -> Result<Vec<NodeId>, HierarchyError> {
        self.graph.require(n)?;
        let start = self.dfs_pos[n];
        let d = self.depth[n];
        let mut out = Vec::new();
        for x in &self.dfs[start..] {
            if x.as_str() != n && self.depth[x] <= d {
                break;
            }
            if self.graph.is_leaf_class(x) {
                out.push(x.clone());
            }
        }
        Ok(out)
    }

    /// Nodes exactly `level` edges below `subtree_root`, in canonical DFS order.
    pub fn nodes_at_level(
        &self,
        subtree_root: &str,
        level: usize,
    ) -> Result<Vec<NodeId>, HierarchyError> {
        self.graph.require(subtree_root)?;
        let start = self.dfs_pos[subtree_root];
        let d = self.depth[subtree_root];
        let mut out = Vec::new();
        for x in &self.dfs[start..] {
            let dx = self.depth[x];
            if x.as_str() != subtree_root && dx <= d {
                break;
            }
            if dx == d + level {
                out.push(x.clone());
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class_index: usize,
    #[serde(rename = "node_id")]
    pub node: NodeId,
    pub display_name: String,
}

/// Binds dataset class indices to hierarchy leaves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DatasetClassTable {
    pub entries: Vec<ClassEntry>,
}

impl DatasetClassTable {
    pub fn parse_csv(text: &str) -> Result<Self, HierarchyError> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| HierarchyError::ClassTable(e.to_string()))?
            .clone();
        if headers != vec!["class_index", "node_id", "display_name"] {
            return Err(HierarchyError::ClassTable(format!("unexpected header {headers:?}")));
        }
        let mut entries = Vec::new();
        for (i, row) in rdr.deserialize::<ClassEntry>().enumerate() {
            entries.push(row.map_err(|_| HierarchyError::MalformedLine(i + 2))?);
        }
        let t = DatasetClassTable { entries };
        t.check()?;
        Ok(t)
    }

    /// Distinct nodes and indices contiguous from 0.
    pub fn check(&self) -> Result<(), HierarchyError> {
        let mut idx: Vec<usize> = self.entries.iter().map(|e| e.class_index).collect();
        idx.sort_unstable();
        if idx.iter().enumerate().any(|(i, &x)| i != x) {
            return Err(HierarchyError::ClassTable(
                "class indices must be distinct and contiguous from 0".into(),
            ));
        }
        let nodes: BTreeSet<&NodeId> = self.entries.iter().map(|e| &e.node).collect();
        if nodes.len() != self.entries.len() {
            return Err(HierarchyError::ClassTable("duplicate node id".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(text: &str) -> HierarchyGraph {
        parse_edges(text).unwrap()
    }

    #[test]
    fn parse_small() {
        let h = g("a b\na c");
        assert_eq!(h.nodes().len(), 3);
        assert_eq!(h.edge_count(), 2);
        assert_eq!(h.root().as_str(), "a");
    }

    #[test]
    fn parse_cycle_has_no_root() {
        assert!(matches!(parse_edges("a b\nb a"), Err(HierarchyError::NoUniqueRoot(r)) if r.is_empty()));
    }

    #[test]
    fn parse_two_roots() {
        assert!(matches!(parse_edges("a b\nc d"), Err(HierarchyError::NoUniqueRoot(r)) if r.len() == 2));
    }

    #[test]
    fn parse_errors() {
        assert_eq!(parse_edges("a b\na"), Err(HierarchyError::MalformedLine(2)));
        assert_eq!(parse_edges("a  b"), Err(HierarchyError::MalformedLine(1)));
        assert_eq!(parse_edges("a b c"), Err(HierarchyError::MalformedLine(1)));
        assert!(matches!(
            parse_edges("a b\n# x\na b"),
            Err(HierarchyError::DuplicateEdge { line: 3, .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines() {
        let h = g("# header\n\na b\n  # indented comment\nb c\n");
        assert_eq!(h.edge_count(), 2);
    }

    #[test]
    fn names() {
        let m = parse_names("n001\tdog").unwrap();
        assert_eq!(m[&nid("n001")], "dog");
        assert!(parse_names("").unwrap().is_empty());
        assert_eq!(parse_names("n001 dog"), Err(HierarchyError::MalformedLine(1)));
        let h = g("a b").with_names(m);
        assert_eq!(h.name("b"), "b");
    }

    #[test]
    fn diamond_report() {
        let r = g("a b\na c\nb d\nc d").validate();
        assert_eq!(r.multi_parent_nodes, vec![(nid("d"), vec![nid("b"), nid("c")])]);
        assert!(r.cycle_witness.is_none());
        assert!(g("a b\nb c").validate().is_empty());
    }

    #[test]
    fn cycle_witness_found() {
        let r = g("r a\na b\nb c\nc a").validate();
        let cyc = r.cycle_witness.expect("cycle");
        assert_eq!(cyc.len(), 3);
        for w in cyc.windows(2) {
            assert_eq!(w[0].1, w[1].0);
        }
        assert_eq!(cyc.last().unwrap().1, cyc[0].0);
    }

    #[test]
    fn depth_and_levels() {
        let t = Tree::new(g("r b\nr a\na x\na y\nb z")).unwrap();
        assert_eq!(t.depth_of("r").unwrap(), 0);
        assert_eq!(t.depth_of("a").unwrap(), 1);
        assert_eq!(t.depth_of("z").unwrap(), 2);
        assert!(t.depth_of("q").is_err());
        assert_eq!(t.nodes_at_level("r", 0).unwrap(), vec![nid("r")]);
        assert_eq!(t.nodes_at_level("r", 1).unwrap(), vec![nid("a"), nid("b")]);
        assert_eq!(t.nodes_at_level("r", 2).unwrap(), vec![nid("x"), nid("y"), nid("z")]);
        assert_eq!(t.nodes_at_level("a", 1).unwrap(), vec![nid("x"), nid("y")]);
        assert!(t.nodes_at_level("r", 3).unwrap().is_empty());
        assert_eq!(t.leaves_under_dfs("r").unwrap(), vec![nid("x"), nid("y"), nid("z")]);
    }

    #[test]
    fn shallow_leaf_not_at_level() {
        let t = Tree::new(g("r a\nr b\nb c")).unwrap();
        assert_eq!(t.nodes_at_level("r", 2).unwrap(), vec![nid("c")]);
    }

    #[test]
    fn tree_rejects_dag() {
        assert!(matches!(
            Tree::new(g("a b\na c\nb d\nc d")),
            Err(HierarchyError::NotATree(_))
        ));
    }

    #[test]
    fn leaves_under_leaf_is_itself() {
        let h = g("a b\na c");
        assert_eq!(h.leaves_under("b").unwrap(), BTreeSet::from([nid("b")]));
        assert_eq!(h.leaves_under("a").unwrap(), h.leaf_classes());
    }

    #[test]
    fn class_table_checks() {
        let t = DatasetClassTable::parse_csv("class_index,node_id,display_name\n1,b,B\n0,c,\"C, see\"\n")
            .unwrap();
        assert_eq!(t.entries[1].display_name, "C, see");
        assert!(DatasetClassTable::parse_csv("class_index,node_id,display_name\n0,b,B\n2,c,C\n").is_err());
        assert!(DatasetClassTable::parse_csv("class_index,node_id,display_name\n0,b,B\n1,b,C\n").is_err());
        assert!(DatasetClassTable::parse_csv("idx,node,name\n0,b,B\n").is_err());

        let h = g("a b\na c\nc d").bind_classes(&t).unwrap();
        let r = h.validate();
        assert_eq!(r.orphan_leaves, vec![nid("d")]);
        assert_eq!(r.interior_classes, vec![nid("c")]);
        assert!(g("a b").bind_classes(&t).is_err());
    }

    #[test]
    fn edge_text_round_trip() {
        let h = g("a c\na b\nb d");
        let back = parse_edges(&h.to_edge_text()).unwrap();
        assert_eq!(h, back);
        assert_eq!(h.to_edge_text(), "a b\na c\nb d\n");
    }

    #[test]
    fn node_id_rules() {
        assert!(NodeId::new("").is_err());
        assert!(NodeId::new("a b").is_err());
        assert!(NodeId::new("n01440764").is_ok());
    }
}
