//! Subpopulation-shift benchmarks over a class hierarchy.
//!
//! * [`hierarchy`]: parse and query the class graph
//! * [`calibration`]: edit scripts that turn a DAG into a tree
//! * [`tasks`]: superclass extraction, sampling and splits; human-study files
//! * [`manifest`]: bind tasks to an image directory
//! * [`eval`]: score prediction files

pub mod calibration;
pub mod eval;
pub mod fixtures;
pub mod hierarchy;
pub mod manifest;
pub mod rng;
pub mod tasks;

pub use hierarchy::{HierarchyGraph, NodeId, Tree};
pub use tasks::{Domain, SplitStrategy, TaskDefinition, TaskSpec};
