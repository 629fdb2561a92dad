//! The shipped ImageNet hierarchy, embedded at compile time.
//!
//! `wordnet_raw.*` is the WordNet 3.0 noun hypernym DAG restricted to the
//! 1000 ImageNet classes and their ancestors. `calibration.script` turns it
//! into the calibrated tree in `hierarchy.*`. The `published/` task files hold
//! the class assignments of the four released benchmarks.

use crate::calibration::{parse_script, CalibrationScript};
use crate::hierarchy::{parse_edges, parse_names, DatasetClassTable, HierarchyGraph, Tree};
use crate::tasks::{Preset, TaskDefinition};

pub const ENTITY: &str = "n00001740";
pub const LIVING_THING: &str = "n00004258";
pub const NON_LIVING_THING: &str = "x00000018";

/// Content hash of the calibrated hierarchy.
pub const HIERARCHY_HASH: &str = "ef8e532bb86d8d54cdd31a5ddccd1a762369c4776f9037afa45e14877d9b7e7b";

pub const HIERARCHY_EDGES: &str = include_str!("../fixtures/hierarchy.edges");
pub const HIERARCHY_NAMES: &str = include_str!("../fixtures/hierarchy.names");
pub const RAW_EDGES: &str = include_str!("../fixtures/wordnet_raw.edges");
pub const RAW_NAMES: &str = include_str!("../fixtures/wordnet_raw.names");
pub const CALIBRATION_SCRIPT: &str = include_str!("../fixtures/calibration.script");
pub const CLASSES_CSV: &str = include_str!("../fixtures/classes.csv");

const PUBLISHED: [&str; 4] = [
    include_str!("../fixtures/published/entity13.json"),
    include_str!("../fixtures/published/entity30.json"),
    include_str!("../fixtures/published/living17.json"),
    include_str!("../fixtures/published/nonliving26.json"),
];

pub fn class_table() -> DatasetClassTable {
    DatasetClassTable::parse_csv(CLASSES_CSV).expect("shipped class table parses")
}

/// Calibrated hierarchy with names and the class table bound.
pub fn calibrated_graph() -> HierarchyGraph {
    parse_edges(HIERARCHY_EDGES)
        .expect("shipped hierarchy parses")
        .with_names(parse_names(HIERARCHY_NAMES).expect("shipped names parse"))
        .bind_classes(&class_table())
        .expect("shipped classes bind")
}

pub fn calibrated_tree() -> Tree {
    Tree::new(calibrated_graph()).expect("shipped hierarchy is a tree")
}

/// Raw WordNet DAG with names; classes are not bound.
pub fn raw_graph() -> HierarchyGraph {
    parse_edges(RAW_EDGES)
        .expect("shipped raw graph parses")
        .with_names(parse_names(RAW_NAMES).expect("shipped raw names parse"))
}

pub fn calibration_script() -> CalibrationScript {
    parse_script(CALIBRATION_SCRIPT).expect("shipped script parses")
}

/// Published class assignment for a preset.
pub fn published(p: Preset) -> TaskDefinition {
    let i = Preset::ALL.iter().position(|q| *q == p).unwrap();
    TaskDefinition::from_json(PUBLISHED[i]).expect("published task parses")
}

pub fn published_json(p: Preset) -> &'static str {
    PUBLISHED[Preset::ALL.iter().position(|q| *q == p).unwrap()]
}
