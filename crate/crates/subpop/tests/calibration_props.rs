use proptest::prelude::*;

use subpop::calibration::{apply_op, apply_script, parse_script, ModOp};
use subpop::hierarchy::{nid, HierarchyGraph, NodeId, Tree};

/// Random rooted tree on `v00..vNN`: node i hangs under node `p[i-1] % i`.
fn tree_strategy() -> impl Strategy<Value = HierarchyGraph> {
    (2usize..24)
        .prop_flat_map(|n| proptest::collection::vec(any::<u32>(), n - 1))
        .prop_map(|ps| {
            let edges = ps.iter().enumerate().map(|(i, &p)| {
                let child = i + 1;
                (nid(&format!("v{:02}", p as usize % child)), nid(&format!("v{child:02}")))
            });
            HierarchyGraph::from_edges(edges).unwrap()
        })
}

fn pick(g: &HierarchyGraph, k: usize, interior_only: bool) -> Option<NodeId> {
    let cands: Vec<&NodeId> = g
        .nodes()
        .iter()
        .filter(|n| *n != g.root())
        .filter(|n| !interior_only || g.children(n).next().is_some())
        .collect();
    (!cands.is_empty()).then(|| cands[k % cands.len()].clone())
}

fn edge_set(g: &HierarchyGraph) -> Vec<(NodeId, NodeId)> {
    g.edges().map(|(p, c)| (p.clone(), c.clone())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn collapse_preserves_leaves(g in tree_strategy(), k in any::<usize>()) {
        let Some(n) = pick(&g, k, true) else { return Ok(()) };
        let before = g.leaves_under(g.root()).unwrap();
        let after = apply_op(&g, &ModOp::Collapse(n)).unwrap();
        prop_assert_eq!(after.leaves_under(after.root()).unwrap(), before);
        prop_assert!(after.validate().is_empty());
    }

    #[test]
    fn insert_above_adds_one_depth(g in tree_strategy(), k in any::<usize>(), at_root in any::<bool>()) {
        let n = if at_root { g.root().clone() } else { pick(&g, k, false).unwrap() };
        let t0 = Tree::new(g.clone()).unwrap();
        let op = ModOp::InsertAbove { node: n.clone(), new_id: nid("fresh"), name: "fresh".into() };
        let g1 = apply_op(&g, &op).unwrap();
        prop_assert_eq!(g1.leaves_under(g1.root()).unwrap(), g.leaves_under(g.root()).unwrap());
        let t1 = Tree::new(g1).unwrap();
        for x in g.nodes() {
            let d0 = t0.depth_of(x).unwrap();
            let d1 = t1.depth_of(x).unwrap();
            if t0.is_ancestor_or_self(&n, x) {
                prop_assert_eq!(d1, d0 + 1, "{} under {}", x, n);
            } else {
                prop_assert_eq!(d1, d0);
            }
        }
    }

    #[test]
    fn insert_then_collapse_is_identity(g in tree_strategy(), k in any::<usize>()) {
        let n = pick(&g, k, false).unwrap();
        let d = nid("fresh");
        let g1 = apply_op(&g, &ModOp::InsertAbove { node: n, new_id: d.clone(), name: "x".into() }).unwrap();
        let g2 = apply_op(&g1, &ModOp::Collapse(d)).unwrap();
        prop_assert_eq!(edge_set(&g2), edge_set(&g));
        prop_assert_eq!(g2.nodes(), g.nodes());
    }

    #[test]
    fn delete_then_reattach(g in tree_strategy(), k in any::<usize>()) {
        let Some(n) = pick(&g, k, true) else { return Ok(()) };
        let parent = g.parents(&n).next().unwrap().clone();
        let kids: Vec<NodeId> = g.children(&n).cloned().collect();
        let mut g1 = apply_op(&g, &ModOp::Delete(n)).unwrap();
        prop_assert_eq!(g1.validate().unreachable.is_empty(), false);
        for c in kids {
            g1 = apply_op(&g1, &ModOp::AddEdge(parent.clone(), c)).unwrap();
        }
        prop_assert!(g1.validate().is_empty());
        prop_assert_eq!(g1.leaves_under(g1.root()).unwrap(), g.leaves_under(g.root()).unwrap());
    }

    #[test]
    fn script_application_is_deterministic(g in tree_strategy(), ks in proptest::collection::vec(any::<usize>(), 1..6)) {
        // build a script of collapses over whatever interior nodes exist
        let mut text = String::new();
        let mut cur = g.clone();
        for k in ks {
            if let Some(n) = pick(&cur, k, true) {
                text.push_str(&format!("collapse {n}\n"));
                cur = apply_op(&cur, &ModOp::Collapse(n)).unwrap();
            }
        }
        let s = parse_script(&text).unwrap();
        let a = apply_script(&g, &s).unwrap();
        let b = apply_script(&g, &s).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a, cur);
    }
}
