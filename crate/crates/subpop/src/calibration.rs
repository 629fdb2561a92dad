//! Hierarchy modification scripts: collapse, insert-above, delete, add-edge.

use std::fmt;

use thiserror::Error;

use crate::hierarchy::{DatasetClassTable, HierarchyGraph, NodeId, ValidationReport};

#[derive(Debug, Error, PartialEq)]
pub enum CalibrationError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("node {0} not found")]
    NodeNotFound(NodeId),
    #[error("node {0} already exists")]
    NodeAlreadyExists(NodeId),
    #[error("cannot modify the root {0}")]
    CannotModifyRoot(NodeId),
    #[error("edge {0} -> {1} already exists")]
    DuplicateEdge(NodeId, NodeId),
    #[error("script line {line}: {source}")]
    OpFailed {
        line: usize,
        #[source]
        source: Box<CalibrationError>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModOp {
    Collapse(NodeId),
    InsertAbove {
        node: NodeId,
        new_id: NodeId,
        name: String,
    },
    Delete(NodeId),
    AddEdge(NodeId, NodeId),
}

impl fmt::Display for ModOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModOp::Collapse(n) => write!(f, "collapse {n}"),
            ModOp::InsertAbove { node, new_id, name } => {
                write!(f, "insert_above {node} {new_id} {name}")
            }
            ModOp::Delete(n) => write!(f, "delete {n}"),
            ModOp::AddEdge(p, c) => write!(f, "add_edge {p} {c}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CalibrationScript {
    /// (source line number, op)
    pub ops: Vec<(usize, ModOp)>,
}

pub fn parse_script(text: &str) -> Result<CalibrationScript, CalibrationError> {
    let mut ops = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| CalibrationError::MalformedLine {
            line,
            reason: reason.to_string(),
        };
        let id = |s: Option<&str>| -> Result<NodeId, CalibrationError> {
            let s = s.ok_or_else(|| bad("missing argument"))?;
            NodeId::new(s).map_err(|_| bad("invalid node id"))
        };
        let (verb, rest) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        let rest = rest.trim_start();
        let op = match verb {
            "collapse" | "delete" => {
                let mut it = rest.split_whitespace();
                let n = id(it.next())?;
                if it.next().is_some() {
                    return Err(bad("too many arguments"));
                }
                if verb == "collapse" {
                    ModOp::Collapse(n)
                } else {
                    ModOp::Delete(n)
                }
            }
            "add_edge" => {
                let mut it = rest.split_whitespace();
                let p = id(it.next())?;
                let c = id(it.next())?;
                if it.next().is_some() {
                    return Err(bad("too many arguments"));
                }
                ModOp::AddEdge(p, c)
            }
            "insert_above" => {
                let mut it = rest.splitn(3, char::is_whitespace);
                let node = id(it.next())?;
                let new_id = id(it.next())?;
                let name = it.next().map(str::trim).unwrap_or("");
                if name.is_empty() {
                    return Err(bad("missing name"));
                }
                ModOp::InsertAbove {
                    node,
                    new_id,
                    name: name.to_string(),
                }
            }
            _ => return Err(bad("unknown operation")),
        };
        ops.push((line, op));
    }
    Ok(CalibrationScript { ops })
}

fn require(g: &HierarchyGraph, n: &NodeId) -> Result<(), CalibrationError> {
    if g.contains(n.as_str()) {
        Ok(())
    } else {
        Err(CalibrationError::NodeNotFound(n.clone()))
    }
}

/// Apply one op to a copy of `graph`.
pub fn apply_op(graph: &HierarchyGraph, op: &ModOp) -> Result<HierarchyGraph, CalibrationError> {
    let mut g = graph.clone();
    apply_in_place(&mut g, op)?;
    Ok(g)
}

fn apply_in_place(g: &mut HierarchyGraph, op: &ModOp) -> Result<(), CalibrationError> {
    match op {
        ModOp::Collapse(n) => {
            require(g, n)?;
            if g.root() == n {
                return Err(CalibrationError::CannotModifyRoot(n.clone()));
            }
            let (ps, cs) = g.remove_node(n);
            for p in &ps {
                for c in &cs {
                    g.insert_edge(p, c);
                }
            }
        }
        ModOp::InsertAbove { node, new_id, name } => {
            require(g, node)?;
            if g.contains(new_id.as_str()) {
                return Err(CalibrationError::NodeAlreadyExists(new_id.clone()));
            }
            let ps: Vec<NodeId> = g.parents(node.as_str()).cloned().collect();
            g.insert_node(new_id.clone(), Some(name.clone()));
            for p in &ps {
                g.remove_edge(p, node);
                g.insert_edge(p, new_id);
            }
            g.insert_edge(new_id, node);
            if g.root() == node {
                g.set_root(new_id.clone());
            }
        }
        ModOp::Delete(n) => {
            require(g, n)?;
            if g.root() == n {
                return Err(CalibrationError::CannotModifyRoot(n.clone()));
            }
            g.remove_node(n);
        }
        ModOp::AddEdge(p, c) => {
            require(g, p)?;
            require(g, c)?;
            if g.has_edge(p.as_str(), c.as_str()) {
                return Err(CalibrationError::DuplicateEdge(p.clone(), c.clone()));
            }
            g.insert_edge(p, c);
        }
    }
    Ok(())
}

/// Apply every op in order. The first failure aborts with its line number.
pub fn apply_script(
    graph: &HierarchyGraph,
    script: &CalibrationScript,
) -> Result<HierarchyGraph, CalibrationError> {
    let mut g = graph.clone();
    for (line, op) in &script.ops {
        apply_in_place(&mut g, op).map_err(|e| CalibrationError::OpFailed {
            line: *line,
            source: Box::new(e),
        })?;
    }
    Ok(g)
}

/// Succeeds when `graph`, with `table` bound, is a tree whose childless nodes
/// are exactly the classes in the table.
pub fn assert_calibrated(
    graph: &HierarchyGraph,
    table: &DatasetClassTable,
) -> Result<(), ValidationReport> {
    let bound = match graph.clone().bind_classes(table) {
        Ok(g) => g,
        Err(_) => {
            // classes missing from the graph count as unreachable
            let missing = table
                .entries
                .iter()
                .filter(|e| !graph.contains(e.node.as_str()))
                .map(|e| e.node.clone())
                .collect();
            let mut r = graph.validate();
            r.unreachable = missing;
            return Err(r);
        }
    };
    let r = bound.validate();
    if r.is_empty() {
        Ok(())
    } else {
        Err(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{nid, parse_edges};

    fn edges(g: &HierarchyGraph) -> Vec<(String, String)> {
        g.edges()
            .map(|(p, c)| (p.to_string(), c.to_string()))
            .collect()
    }

    fn e(p: &str, c: &str) -> (String, String) {
        (p.into(), c.into())
    }

    #[test]
    fn collapse_chain() {
        let g = parse_edges("a b\nb c").unwrap();
        let g = apply_op(&g, &ModOp::Collapse(nid("b"))).unwrap();
        assert_eq!(edges(&g), vec![e("a", "c")]);
    }

    #[test]
    fn collapse_fans_out_to_all_parents() {
        let g = parse_edges("r a\nr b\na x\nb x\nx c\nx d").unwrap();
        let g = apply_op(&g, &ModOp::Collapse(nid("x"))).unwrap();
        assert_eq!(
            edges(&g),
            vec![e("a", "c"), e("a", "d"), e("b", "c"), e("b", "d"), e("r", "a"), e("r", "b")]
        );
    }

    #[test]
    fn insert_above() {
        let g = parse_edges("a c").unwrap();
        let op = ModOp::InsertAbove {
            node: nid("c"),
            new_id: nid("d"),
            name: "dummy".into(),
        };
        let g2 = apply_op(&g, &op).unwrap();
        assert_eq!(edges(&g2), vec![e("a", "d"), e("d", "c")]);
        assert_eq!(g2.name("d"), "dummy");
        assert_eq!(
            apply_op(&g2, &op),
            Err(CalibrationError::NodeAlreadyExists(nid("d")))
        );
    }

    #[test]
    fn insert_above_root_moves_root() {
        let g = parse_edges("a c").unwrap();
        let g = apply_op(
            &g,
            &ModOp::InsertAbove {
                node: nid("a"),
                new_id: nid("top"),
                name: "top".into(),
            },
        )
        .unwrap();
        assert_eq!(g.root().as_str(), "top");
    }

    #[test]
    fn delete_then_add_edge() {
        let g = parse_edges("a b\nb c").unwrap();
        let g = apply_op(&g, &ModOp::Delete(nid("b"))).unwrap();
        assert_eq!(g.validate().unreachable, vec![nid("c")]);
        let g = apply_op(&g, &ModOp::AddEdge(nid("a"), nid("c"))).unwrap();
        assert_eq!(edges(&g), vec![e("a", "c")]);
        assert!(g.validate().is_empty());
    }

    #[test]
    fn op_errors() {
        let g = parse_edges("a b").unwrap();
        assert_eq!(
            apply_op(&g, &ModOp::Collapse(nid("a"))),
            Err(CalibrationError::CannotModifyRoot(nid("a")))
        );
        assert_eq!(
            apply_op(&g, &ModOp::Delete(nid("a"))),
            Err(CalibrationError::CannotModifyRoot(nid("a")))
        );
        assert_eq!(
            apply_op(&g, &ModOp::Delete(nid("z"))),
            Err(CalibrationError::NodeNotFound(nid("z")))
        );
        assert_eq!(
            apply_op(&g, &ModOp::AddEdge(nid("a"), nid("b"))),
            Err(CalibrationError::DuplicateEdge(nid("a"), nid("b")))
        );
    }

    #[test]
    fn parse_ops() {
        let s = parse_script("# c\ncollapse n001\n\ninsert_above n001 x9 my node\ndelete q\nadd_edge a b\n")
            .unwrap();
        assert_eq!(
            s.ops,
            vec![
                (2, ModOp::Collapse(nid("n001"))),
                (
                    4,
                    ModOp::InsertAbove {
                        node: nid("n001"),
                        new_id: nid("x9"),
                        name: "my node".into()
                    }
                ),
                (5, ModOp::Delete(nid("q"))),
                (6, ModOp::AddEdge(nid("a"), nid("b"))),
            ]
        );
        for (i, (_, op)) in s.ops.iter().enumerate() {
            let again = parse_script(&op.to_string()).unwrap();
            assert_eq!(&again.ops[0].1, op, "op {i}");
        }
    }

    #[test]
    fn parse_errors() {
        for bad in ["collapse", "collapse a b", "insert_above a b", "add_edge a", "rename a b", "delete"] {
            assert!(
                matches!(parse_script(bad), Err(CalibrationError::MalformedLine { line: 1, .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn script_failure_reports_line() {
        let g = parse_edges("a b\nb c").unwrap();
        let s = parse_script("delete b\n# gap\ncollapse b\n").unwrap();
        match apply_script(&g, &s) {
            Err(CalibrationError::OpFailed { line, source }) => {
                assert_eq!(line, 3);
                assert_eq!(*source, CalibrationError::NodeNotFound(nid("b")));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(apply_script(&g, &CalibrationScript::default()).unwrap(), g);
    }

    #[test]
    fn assert_calibrated_cases() {
        let table =
            DatasetClassTable::parse_csv("class_index,node_id,display_name\n0,c,C\n1,d,D\n").unwrap();
        let tree = parse_edges("a b\nb c\nb d").unwrap();
        assert!(assert_calibrated(&tree, &table).is_ok());

        let diamond = parse_edges("a b\na x\nb c\nx c\nb d").unwrap();
        let r = assert_calibrated(&diamond, &table).unwrap_err();
        assert_eq!(r.multi_parent_nodes[0].0, nid("c"));

        let orphan = parse_edges("a b\nb c\nb d\na e").unwrap();
        let r = assert_calibrated(&orphan, &table).unwrap_err();
        assert_eq!(r.orphan_leaves, vec![nid("e")]);
    }
}
