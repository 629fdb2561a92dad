//! Human-study task files: two-group image-matching tasks with a separate
//! answer key.
//!
//! Context images come from the source train split. Probes come from the
//! target val split in shift mode, or from the source val split in control
//! mode, so probes never overlap context. Probes are split evenly between the
//! two superclasses of a pair.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::NodeId;
use crate::manifest::{DatasetIndex, Split};
use crate::rng::Stream;
use crate::tasks::{Domain, Superclass, TaskDefinition};

#[derive(Debug, Error, PartialEq)]
pub enum StudyError {
    #[error("{node}: need {need} {what} images, have {have}")]
    InsufficientImages {
        node: NodeId,
        what: String,
        need: usize,
        have: usize,
    },
    #[error("need at least two superclasses and at least one pairing")]
    TooFewSuperclasses,
    #[error("probe count must be even, got {0}")]
    OddProbes(usize),
    #[error("class {0} is not in the dataset index")]
    MissingClass(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMode {
    Shift,
    Control,
}

#[derive(Clone, Debug)]
pub struct StudyOptions {
    pub pairings_per_superclass: usize,
    pub context_per_group: usize,
    pub probes: usize,
    pub annotators_per_task: usize,
    pub mode: StudyMode,
    pub seed: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            pairings_per_superclass: 3,
            context_per_group: 20,
            probes: 12,
            annotators_per_task: 3,
            mode: StudyMode::Shift,
            seed: 0,
        }
    }
}

/// Annotator-facing file: no superclass identities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyTask {
    pub task_id: String,
    pub annotators: usize,
    pub group_a: Vec<String>,
    pub group_b: Vec<String>,
    pub probes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeAnswer {
    pub image: String,
    /// "a" or "b"
    pub group: String,
    pub superclass: NodeId,
    pub subclass: NodeId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskAnswers {
    pub task_id: String,
    pub group_a_superclass: NodeId,
    pub group_b_superclass: NodeId,
    pub probes: Vec<ProbeAnswer>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyTaskSet {
    pub mode: StudyMode,
    /// (superclass drawing the pairing, partner)
    pub pairs: Vec<(NodeId, NodeId)>,
    pub unique_unordered_pairs: usize,
    pub tasks: Vec<StudyTask>,
    pub answer_key: Vec<TaskAnswers>,
}

/// (image path, subclass) pool for one superclass.
fn pool(
    index: &DatasetIndex,
    sc: &Superclass,
    domain: Domain,
    split: Split,
) -> Result<Vec<(String, NodeId)>, StudyError> {
    let mut out = Vec::new();
    for sub in sc.subpops(domain) {
        let imgs = index
            .get(sub.as_str())
            .ok_or_else(|| StudyError::MissingClass(sub.clone()))?;
        out.extend(imgs.paths(split).iter().map(|p| (p.clone(), sub.clone())));
    }
    out.sort();
    Ok(out)
}

fn draw(
    pool: &[(String, NodeId)],
    k: usize,
    node: &NodeId,
    what: &str,
    rng: &mut Stream,
) -> Result<Vec<(String, NodeId)>, StudyError> {
    if pool.len() < k {
        return Err(StudyError::InsufficientImages {
            node: node.clone(),
            what: what.to_string(),
            need: k,
            have: pool.len(),
        });
    }
    Ok(rng
        .choose_indices(pool.len(), k)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

pub fn make_human_study_tasks(
    task: &TaskDefinition,
    index: &DatasetIndex,
    opts: &StudyOptions,
) -> Result<StudyTaskSet, StudyError> {
    let c = task.superclasses.len();
    if c < 2 || opts.pairings_per_superclass == 0 {
        return Err(StudyError::TooFewSuperclasses);
    }
    if !opts.probes.is_multiple_of(2) {
        return Err(StudyError::OddProbes(opts.probes));
    }
    let (probe_domain, probe_split, probe_what) = match opts.mode {
        StudyMode::Shift => (Domain::Target, Split::Val, "target val"),
        StudyMode::Control => (Domain::Source, Split::Val, "source val"),
    };

    let mut pairs = Vec::new();
    for (i, sc) in task.superclasses.iter().enumerate() {
        let others: Vec<usize> = (0..c).filter(|&j| j != i).collect();
        let k = opts.pairings_per_superclass.min(others.len());
        let mut rng = Stream::keyed(opts.seed, "study-partners", sc.node.as_str());
        for pick in rng.choose_indices(others.len(), k) {
            pairs.push((i, others[pick]));
        }
    }
    let mut unordered: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    unordered.sort();
    unordered.dedup();

    let mut tasks = Vec::with_capacity(pairs.len());
    let mut answer_key = Vec::with_capacity(pairs.len());
    for (t, &(i, j)) in pairs.iter().enumerate() {
        let task_id = format!("task-{t:04}");
        let mut rng = Stream::keyed(opts.seed, "study-task", &task_id);
        let (mut first, mut second) = (&task.superclasses[i], &task.superclasses[j]);
        if rng.below(2) == 1 {
            std::mem::swap(&mut first, &mut second);
        }
        let mut groups = Vec::new();
        let mut probes = Vec::new();
        for (label, sc) in [("a", first), ("b", second)] {
            let ctx = pool(index, sc, Domain::Source, Split::Train)?;
            let ctx = draw(&ctx, opts.context_per_group, &sc.node, "source train", &mut rng)?;
            groups.push(ctx.into_iter().map(|(p, _)| p).collect::<Vec<_>>());
            let pr = pool(index, sc, probe_domain, probe_split)?;
            for (img, sub) in draw(&pr, opts.probes / 2, &sc.node, probe_what, &mut rng)? {
                probes.push(ProbeAnswer {
                    image: img,
                    group: label.to_string(),
                    superclass: sc.node.clone(),
                    subclass: sub,
                });
            }
        }
        rng.shuffle(&mut probes);
        let group_b = groups.pop().unwrap();
        let group_a = groups.pop().unwrap();
        tasks.push(StudyTask {
            task_id: task_id.clone(),
            annotators: opts.annotators_per_task,
            group_a,
            group_b,
            probes: probes.iter().map(|p| p.image.clone()).collect(),
        });
        answer_key.push(TaskAnswers {
            task_id,
            group_a_superclass: first.node.clone(),
            group_b_superclass: second.node.clone(),
            probes,
        });
    }

    Ok(StudyTaskSet {
        mode: opts.mode,
        pairs: pairs
            .iter()
            .map(|&(a, b)| {
                (
                    task.superclasses[a].node.clone(),
                    task.superclasses[b].node.clone(),
                )
            })
            .collect(),
        unique_unordered_pairs: unordered.len(),
        tasks,
        answer_key,
    })
}
