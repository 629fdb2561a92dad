//! Scoring: top-1, per-class, relative and pairwise accuracy, percentile
//! bootstrap intervals, the constant-drop baseline and the Pareto frontier.
//!
//! Argmax and pairwise ties go to the lower class index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Stream;
use crate::tasks::Domain;

mod report;

pub use report::{
    evaluate, fig3_csv, fig4_csv, read_predictions, write_predictions, EvalConfig, EvalReport,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no records in selection")]
    EmptySelection,
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("row {row}: label {label} outside 0..{classes}")]
    OutOfRangeLabel { row: usize, label: usize, classes: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub domain: Domain,
    pub true_superclass: usize,
    pub scores: Vec<f64>,
}

impl PredictionRecord {
    pub fn predicted(&self) -> usize {
        argmax(&self.scores)
    }

    pub fn correct(&self) -> bool {
        self.predicted() == self.true_superclass
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    pub task_name: String,
    pub model_tag: String,
    pub mode_tag: String,
    pub num_classes: usize,
    pub records: Vec<PredictionRecord>,
}

impl PredictionSet {
    pub fn select(&self, domain: Option<Domain>) -> Vec<&PredictionRecord> {
        self.records
            .iter()
            .filter(|r| domain.is_none_or(|d| r.domain == d))
            .collect()
    }
}

/// Index of the largest score; the first (lowest) index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// True when the top score is shared by two or more classes.
pub fn has_argmax_tie(scores: &[f64]) -> bool {
    let b = argmax(scores);
    scores.iter().enumerate().any(|(i, &s)| i != b && s == scores[b])
}

pub fn top1(records: &[&PredictionRecord]) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptySelection);
    }
    let hits = records.iter().filter(|r| r.correct()).count();
    Ok(hits as f64 / records.len() as f64)
}

pub fn top1_accuracy(preds: &PredictionSet, domain: Option<Domain>) -> Result<f64, EvalError> {
    top1(&preds.select(domain))
}

pub fn relative_accuracy(target_acc: f64, source_acc: f64) -> Result<f64, EvalError> {
    if source_acc <= 0.0 {
        return Err(EvalError::UndefinedMetric(
            "relative accuracy with zero source accuracy".into(),
        ));
    }
    Ok(target_acc / source_acc)
}

/// Target over source top-1 on a mixed-domain selection.
pub fn relative_of(records: &[&PredictionRecord]) -> Result<f64, EvalError> {
    let (src, tgt): (Vec<&PredictionRecord>, Vec<&PredictionRecord>) =
        records.iter().partition(|r| r.domain == Domain::Source);
    relative_accuracy(top1(&tgt)?, top1(&src)?)
}

/// Accuracy within each true-class stratum; `None` for absent classes.
pub fn per_class(records: &[&PredictionRecord], num_classes: usize) -> Vec<Option<f64>> {
    let mut hit = vec![0usize; num_classes];
    let mut tot = vec![0usize; num_classes];
    for r in records {
        tot[r.true_superclass] += 1;
        if r.correct() {
            hit[r.true_superclass] += 1;
        }
    }
    hit.iter()
        .zip(&tot)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect()
}

pub fn per_class_accuracy(preds: &PredictionSet, domain: Option<Domain>) -> Vec<Option<f64>> {
    per_class(&preds.select(domain), preds.num_classes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Each class draws this many random partners.
    PerClass(usize),
    /// Every unordered pair once.
    All,
}

/// Superclass pairs to score. In per-class mode class `c` draws partners
/// without replacement from its own stream keyed by `(seed, c)`.
pub fn draw_pairs(num_classes: usize, mode: PairMode, seed: u64) -> Vec<(usize, usize)> {
    match mode {
        PairMode::All => (0..num_classes)
            .flat_map(|a| (a + 1..num_classes).map(move |b| (a, b)))
            .collect(),
        PairMode::PerClass(n) => {
            let mut out = Vec::new();
            for c in 0..num_classes {
                let others: Vec<usize> = (0..num_classes).filter(|&j| j != c).collect();
                let mut rng = Stream::indexed(seed, "pairs", c as u64);
                for i in rng.choose_indices(others.len(), n.min(others.len())) {
                    out.push((c, others[i]));
                }
            }
            out
        }
    }
}

/// Mean over pairs of the binary accuracy on records whose true class is in
/// the pair. Pairs without any records are skipped.
pub fn pairwise_on(records: &[&PredictionRecord], pairs: &[(usize, usize)]) -> Result<f64, EvalError> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for &(a, b) in pairs {
        let (lo, hi) = (a.min(b), a.max(b));
        let mut n = 0usize;
        let mut hit = 0usize;
        for r in records {
            if r.true_superclass != lo && r.true_superclass != hi {
                continue;
            }
            n += 1;
            let pred = if r.scores[hi] > r.scores[lo] { hi } else { lo };
            if pred == r.true_superclass {
                hit += 1;
            }
        }
        if n > 0 {
            sum += hit as f64 / n as f64;
            used += 1;
        }
    }
    if used == 0 {
        return Err(EvalError::EmptySelection);
    }
    Ok(sum / used as f64)
}

pub fn pairwise_binary_accuracy(
    preds: &PredictionSet,
    domain: Option<Domain>,
    mode: PairMode,
    seed: u64,
) -> Result<f64, EvalError> {
    pairwise_on(&preds.select(domain), &draw_pairs(preds.num_classes, mode, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub bootstrap_b: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct BootstrapConfig {
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub parallel: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b: 1000,
            alpha: 0.05,
            seed: 0,
            parallel: true,
        }
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(xs: &[f64], p: f64) -> f64 {
    let h = (xs.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(xs.len() - 1);
    xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
}

/// Percentile bootstrap over records. Resample `i` draws `n` records with
/// replacement from a stream keyed by `(seed, i)`, so serial and parallel
/// runs agree. Resamples on which the metric is undefined are dropped and
/// `bootstrap_b` reports how many were kept. The interval is widened, if
/// needed, to contain the point estimate.
pub fn bootstrap_ci<F>(
    records: &[&PredictionRecord],
    metric: F,
    cfg: &BootstrapConfig,
) -> Result<MetricEstimate, EvalError>
where
    F: Fn(&[&PredictionRecord]) -> Result<f64, EvalError> + Sync,
{
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(EvalError::InvalidArgument(format!("alpha {} not in (0,1)", cfg.alpha)));
    }
    if cfg.b == 0 {
        return Err(EvalError::InvalidArgument("bootstrap B must be positive".into()));
    }
    let point = metric(records)?;
    let n = records.len();
    let one = |i: usize| -> Option<f64> {
        let mut rng = Stream::indexed(cfg.seed, "bootstrap", i as u64);
        let sample: Vec<&PredictionRecord> =
            (0..n).map(|_| records[rng.below(n as u64) as usize]).collect();
        metric(&sample).ok()
    };
    let vals: Vec<Option<f64>> = if cfg.parallel {
        (0..cfg.b).into_par_iter().map(one).collect()
    } else {
        (0..cfg.b).map(one).collect()
    };
    let mut vals: Vec<f64> = vals.into_iter().flatten().collect();
    if vals.is_empty() {
        return Err(EvalError::UndefinedMetric("metric undefined on every resample".into()));
    }
    vals.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&vals, cfg.alpha / 2.0);
    let hi = quantile_sorted(&vals, 1.0 - cfg.alpha / 2.0);
    Ok(MetricEstimate {
        point,
        ci_low: lo.min(point),
        ci_high: hi.max(point),
        n,
        bootstrap_b: vals.len(),
    })
}

/// Target accuracy predicted for `query_source` if the anchor's
/// target/source ratio held, clamped to [0, 1].
pub fn constant_drop_baseline(
    anchor_source: f64,
    anchor_target: f64,
    query_source: f64,
) -> Result<f64, EvalError> {
    if anchor_source <= 0.0 {
        return Err(EvalError::UndefinedMetric("anchor source accuracy is zero".into()));
    }
    Ok((query_source * anchor_target / anchor_source).clamp(0.0, 1.0))
}

fn dominates(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 >= q.0 && p.1 >= q.1 && (p.0 > q.0 || p.1 > q.1)
}

/// For each point, whether no other point dominates it.
pub fn pareto_mask(points: &[(f64, f64)]) -> Vec<bool> {
    points
        .iter()
        .map(|&q| !points.iter().any(|&p| dominates(p, q)))
        .collect()
}

/// Labels of non-dominated (source_acc, relative_acc) points, by ascending
/// source accuracy; equal source accuracies keep input order.
pub fn pareto_frontier(points: &[(f64, f64, String)]) -> Vec<String> {
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
    let mask = pareto_mask(&xy);
    let mut keep: Vec<&(f64, f64, String)> = points
        .iter()
        .zip(mask)
        .filter(|(_, m)| *m)
        .map(|(p, _)| p)
        .collect();
    keep.sort_by(|a, b| a.0.total_cmp(&b.0));
    keep.into_iter().map(|p| p.2.clone()).collect()
}
