//! Prediction files, the evaluation report and plot tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use super::{
    bootstrap_ci, draw_pairs, has_argmax_tie, pairwise_on, relative_of, top1, BootstrapConfig,
    EvalError, MetricEstimate, PairMode, PredictionRecord, PredictionSet,
};
use crate::tasks::{Domain, TaskDefinition};

/// Parse `example_id,domain,true_superclass,score_0,...,score_{C-1}` where C
/// is the number of superclasses in `task`.
pub fn read_predictions<R: io::Read>(
    r: R,
    task: &TaskDefinition,
    model_tag: &str,
    mode_tag: &str,
) -> Result<PredictionSet, EvalError> {
    let c = task.num_classes();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr
        .headers()
        .map_err(|e| EvalError::SchemaMismatch(e.to_string()))?
        .clone();
    let mut expect = vec![
        "example_id".to_string(),
        "domain".to_string(),
        "true_superclass".to_string(),
    ];
    expect.extend((0..c).map(|i| format!("score_{i}")));
    if header.iter().ne(expect.iter().map(String::as_str)) {
        return Err(EvalError::SchemaMismatch(format!(
            "expected {} columns ({} scores) with header {}, got {}",
            expect.len(),
            c,
            expect.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| EvalError::MalformedRow { row: line, reason };
        let row = row.map_err(|e| bad(e.to_string()))?;
        let domain: Domain = row[1].parse().map_err(bad)?;
        let label: usize = row[2]
            .parse()
            .map_err(|_| bad(format!("bad label {:?}", &row[2])))?;
        if label >= c {
            return Err(EvalError::OutOfRangeLabel {
                row: line,
                label,
                classes: c,
            });
        }
        let mut scores = Vec::with_capacity(c);
        for f in row.iter().skip(3) {
            let v: f64 = f.parse().map_err(|_| bad(format!("bad score {f:?}")))?;
            if !v.is_finite() {
                return Err(bad(format!("non-finite score {f:?}")));
            }
            scores.push(v);
        }
        if !seen.insert((domain, row[0].to_string())) {
            return Err(bad(format!("duplicate example id {:?} in {domain}", &row[0])));
        }
        records.push(PredictionRecord {
            example_id: row[0].to_string(),
            domain,
            true_superclass: label,
            scores,
        });
    }
    Ok(PredictionSet {
        task_name: task.spec.name.clone(),
        model_tag: model_tag.to_string(),
        mode_tag: mode_tag.to_string(),
        num_classes: c,
        records,
    })
}

pub fn write_predictions<W: io::Write>(preds: &PredictionSet, w: W) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![
        "example_id".to_string(),
        "domain".to_string(),
        "true_superclass".to_string(),
    ];
    header.extend((0..preds.num_classes).map(|i| format!("score_{i}")));
    wtr.write_record(&header)?;
    for r in &preds.records {
        let mut row = vec![
            r.example_id.clone(),
            r.domain.to_string(),
            r.true_superclass.to_string(),
        ];
        row.extend(r.scores.iter().map(|s| s.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()
}

#[derive(Clone, Copy, Debug)]
pub struct EvalConfig {
    pub bootstrap: BootstrapConfig,
    /// `None` skips the pairwise metric.
    pub pairs: Option<PairMode>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            bootstrap: BootstrapConfig::default(),
            pairs: Some(PairMode::PerClass(3)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub model: String,
    pub mode: String,
    pub seed: u64,
    pub bootstrap_b: usize,
    pub alpha: f64,
    pub pair_mode: Option<PairMode>,
    pub source_acc: MetricEstimate,
    pub target_acc: MetricEstimate,
    pub relative_acc: MetricEstimate,
    pub per_class_source: Vec<Option<MetricEstimate>>,
    pub per_class_target: Vec<Option<MetricEstimate>>,
    /// Computed on target-domain records.
    pub pairwise_binary: Option<MetricEstimate>,
    /// Records whose top score is shared by several classes.
    pub argmax_ties: usize,
}

fn per_class_estimates(
    records: &[&PredictionRecord],
    c: usize,
    cfg: &BootstrapConfig,
) -> Result<Vec<Option<MetricEstimate>>, EvalError> {
    (0..c)
        .map(|k| {
            let sub: Vec<&PredictionRecord> = records
                .iter()
                .copied()
                .filter(|r| r.true_superclass == k)
                .collect();
            if sub.is_empty() {
                Ok(None)
            } else {
                bootstrap_ci(&sub, top1, cfg).map(Some)
            }
        })
        .collect()
}

pub fn evaluate(preds: &PredictionSet, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let b = &cfg.bootstrap;
    let src = preds.select(Some(Domain::Source));
    let tgt = preds.select(Some(Domain::Target));
    let all = preds.select(None);
    let pairwise = match cfg.pairs {
        Some(mode) => {
            let pairs = draw_pairs(preds.num_classes, mode, b.seed);
            Some(bootstrap_ci(&tgt, |rs| pairwise_on(rs, &pairs), b)?)
        }
        None => None,
    };
    Ok(EvalReport {
        task: preds.task_name.clone(),
        model: preds.model_tag.clone(),
        mode: preds.mode_tag.clone(),
        seed: b.seed,
        bootstrap_b: b.b,
        alpha: b.alpha,
        pair_mode: cfg.pairs,
        source_acc: bootstrap_ci(&src, top1, b)?,
        target_acc: bootstrap_ci(&tgt, top1, b)?,
        relative_acc: bootstrap_ci(&all, relative_of, b)?,
        per_class_source: per_class_estimates(&src, preds.num_classes, b)?,
        per_class_target: per_class_estimates(&tgt, preds.num_classes, b)?,
        pairwise_binary: pairwise,
        argmax_ties: preds.records.iter().filter(|r| has_argmax_tie(&r.scores)).count(),
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// One row per metric: `metric,class,point,ci_low,ci_high,n,bootstrap_b`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,class,point,ci_low,ci_high,n,bootstrap_b\n");
        let mut row = |name: &str, class: Option<usize>, m: &MetricEstimate| {
            let class = class.map(|c| c.to_string()).unwrap_or_default();
            let _ = writeln!(
                s,
                "{name},{class},{},{},{},{},{}",
                m.point, m.ci_low, m.ci_high, m.n, m.bootstrap_b
            );
        };
        row("source_acc", None, &self.source_acc);
        row("target_acc", None, &self.target_acc);
        row("relative_acc", None, &self.relative_acc);
        if let Some(p) = &self.pairwise_binary {
            row("pairwise_binary", None, p);
        }
        for (i, m) in self.per_class_source.iter().enumerate() {
            if let Some(m) = m {
                row("per_class_source", Some(i), m);
            }
        }
        for (i, m) in self.per_class_target.iter().enumerate() {
            if let Some(m) = m {
                row("per_class_target", Some(i), m);
            }
        }
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn is_rt(r: &EvalReport) -> bool {
    r.mode == "target-rt"
}

/// Accuracy-vs-accuracy table: one row per non-retrained report, with the
/// constant-drop baseline anchored on `anchor` (a model tag; defaults to the
/// first row) and the target accuracy of a matching `target-rt` report.
pub fn fig3_csv(reports: &[EvalReport], anchor: Option<&str>) -> Result<String, EvalError> {
    let rows: Vec<&EvalReport> = reports.iter().filter(|r| !is_rt(r)).collect();
    let a = match anchor {
        Some(tag) => rows
            .iter()
            .find(|r| r.model == tag)
            .ok_or_else(|| EvalError::InvalidArgument(format!("no report for anchor model {tag:?}")))?,
        None => rows
            .first()
            .ok_or_else(|| EvalError::InvalidArgument("no standard-mode reports".into()))?,
    };
    let mut s = String::from("task,model,mode,source_acc,target_acc,baseline,target_rt\n");
    for r in &rows {
        let base = super::constant_drop_baseline(a.source_acc.point, a.target_acc.point, r.source_acc.point)?;
        let rt = reports
            .iter()
            .find(|q| is_rt(q) && q.model == r.model && q.task == r.task)
            .map(|q| q.target_acc.point);
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.task,
            r.model,
            r.mode,
            r.source_acc.point,
            r.target_acc.point,
            base,
            opt(rt)
        );
    }
    Ok(s)
}

/// Accuracy-vs-robustness table with Pareto flags over non-retrained reports.
pub fn fig4_csv(reports: &[EvalReport]) -> String {
    let rows: Vec<&EvalReport> = reports.iter().filter(|r| !is_rt(r)).collect();
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.source_acc.point, r.relative_acc.point))
        .collect();
    let mask = super::pareto_mask(&pts);
    let mut s = String::from("task,model,mode,source_acc,relative_acc,ci_low,ci_high,on_frontier\n");
    for (r, on) in rows.iter().zip(mask) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.task,
            r.model,
            r.mode,
            r.source_acc.point,
            r.relative_acc.point,
            r.relative_acc.ci_low,
            r.relative_acc.ci_high,
            on
        );
    }
    s
}
