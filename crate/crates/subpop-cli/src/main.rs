//! `subpop` command-line tool.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use subpop::calibration::{apply_script, parse_script};
use subpop::eval::{
    evaluate, fig3_csv, fig4_csv, read_predictions, BootstrapConfig, EvalConfig, EvalReport, PairMode,
};
use subpop::fixtures;
use subpop::hierarchy::{parse_edges, parse_names, DatasetClassTable, HierarchyError, HierarchyGraph, NodeId, Tree};
use subpop::manifest::{emit_manifest, materialize, scan_dataset, write_manifest, Split};
use subpop::tasks::study::{make_human_study_tasks, StudyMode, StudyOptions};
use subpop::tasks::{make_task, Domain, Preset, SplitStrategy, TaskDefinition, TaskError, TaskSpec};

#[derive(Parser)]
#[command(name = "subpop", version, about = "Subpopulation-shift benchmark tools")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Edge file (`parent child` per line); defaults to the shipped hierarchy
    #[arg(long, global = true)]
    hierarchy: Option<PathBuf>,
    /// Tab-separated `id<TAB>name` file
    #[arg(long, global = true)]
    names: Option<PathBuf>,
    /// Dataset class table CSV
    #[arg(long, global = true)]
    classes: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file, or directory for commands that write several files
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Cmd {
    /// Hierarchy checks and calibration
    #[command(subcommand)]
    Hierarchy(HierarchyCmd),
    /// Build task definitions
    #[command(subcommand)]
    Task(TaskCmd),
    /// Per-domain image manifests
    #[command(subcommand)]
    Manifest(ManifestCmd),
    /// Human-study task files
    #[command(subcommand)]
    Study(StudyCmd),
    /// Score predictions and build plot tables
    #[command(subcommand)]
    Eval(EvalCmd),
}

#[derive(Subcommand)]
enum HierarchyCmd {
    /// Exit 0 if the hierarchy is a clean tree, 2 otherwise
    Validate,
    /// Apply a modification script; writes hierarchy.edges and hierarchy.names
    Calibrate {
        #[arg(long)]
        script: PathBuf,
    },
}

#[derive(Subcommand)]
enum TaskCmd {
    Make {
        #[arg(long)]
        root: String,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        subpops: usize,
        #[arg(long, value_parser = parse_split_strategy)]
        split: SplitStrategy,
        #[arg(long, default_value = "custom")]
        name: String,
    },
    /// One of the four released benchmarks, always over the shipped hierarchy
    Presets {
        #[arg(long, value_parser = parse_preset)]
        name: Preset,
        #[arg(long, value_parser = parse_split_strategy, default_value = "rand")]
        split: SplitStrategy,
    },
}

#[derive(Subcommand)]
enum ManifestCmd {
    Emit {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_domain)]
        domain: Domain,
        #[arg(long, value_parser = parse_data_split)]
        split: Split,
        /// Also build a symlink tree under this directory
        #[arg(long)]
        materialize: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum StudyCmd {
    Make {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Draw probes from source val instead of target val
        #[arg(long)]
        control: bool,
        #[arg(long, default_value_t = 3)]
        pairings: usize,
        #[arg(long, default_value_t = 20)]
        context: usize,
        #[arg(long, default_value_t = 12)]
        probes: usize,
        #[arg(long, default_value_t = 3)]
        annotators: usize,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    Score {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        preds: PathBuf,
        #[arg(long, default_value_t = 1000)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, conflicts_with = "all_pairs")]
        pairs_per_class: Option<usize>,
        #[arg(long)]
        all_pairs: bool,
        #[arg(long, default_value = "model")]
        model: String,
        /// e.g. "standard" or "target-rt"
        #[arg(long, default_value = "standard")]
        mode: String,
    },
    /// Writes fig3.csv and fig4.csv
    Plotdata {
        #[arg(long, num_args = 1.., required = true)]
        reports: Vec<PathBuf>,
        /// Model tag whose drop defines the baseline; defaults to the first report
        #[arg(long)]
        anchor: Option<String>,
    },
}

fn parse_split_strategy(s: &str) -> Result<SplitStrategy, String> {
    s.parse()
}
fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse()
}
fn parse_domain(s: &str) -> Result<Domain, String> {
    s.parse()
}
fn parse_data_split(s: &str) -> Result<Split, String> {
    s.parse()
}

/// Input parsed but failed a structural check (exit 2).
#[derive(Debug)]
struct ValidationFailed(String);

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationFailed {}

/// Bad combination of arguments that clap cannot express (exit 1).
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn is_structural(e: &HierarchyError) -> bool {
    matches!(
        e,
        HierarchyError::NotATree(_) | HierarchyError::NoUniqueRoot(_) | HierarchyError::ClassTable(_)
    )
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if cause.is::<ValidationFailed>() {
            return 2;
        }
        if cause.downcast_ref::<HierarchyError>().is_some_and(is_structural) {
            return 2;
        }
        match cause.downcast_ref::<TaskError>() {
            Some(TaskError::Invariant(_)) => return 2,
            Some(TaskError::Hierarchy(h)) if is_structural(h) => return 2,
            _ => {}
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Write to `--out`, or stdout when it is absent.
fn emit(g: &Global, text: &str) -> Result<()> {
    match &g.out {
        Some(p) => write_file(p, text),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn out_dir(g: &Global) -> Result<&Path> {
    g.out
        .as_deref()
        .ok_or_else(|| anyhow!(Usage("this command writes several files; pass --out <dir>".into())))
}

fn class_table(g: &Global) -> Result<Option<DatasetClassTable>> {
    match &g.classes {
        Some(p) => Ok(Some(DatasetClassTable::parse_csv(&read(p)?)?)),
        None => Ok(None),
    }
}

/// The user hierarchy if `--hierarchy` is given, else `default`.
fn load_graph(g: &Global, default: fn() -> HierarchyGraph) -> Result<HierarchyGraph> {
    let mut graph = match &g.hierarchy {
        Some(p) => parse_edges(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => {
            if g.names.is_some() || g.classes.is_some() {
                bail!(Usage("--names and --classes need --hierarchy".into()));
            }
            return Ok(default());
        }
    };
    if let Some(p) = &g.names {
        graph = graph.with_names(parse_names(&read(p)?).with_context(|| format!("parsing {}", p.display()))?);
    }
    if let Some(t) = class_table(g)? {
        graph = graph.bind_classes(&t)?;
    }
    Ok(graph)
}

fn load_task(path: &Path) -> Result<TaskDefinition> {
    TaskDefinition::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.cmd {
        Cmd::Hierarchy(HierarchyCmd::Validate) => {
            let graph = load_graph(g, fixtures::calibrated_graph)?;
            let report = graph.validate();
            let text = match g.format {
                Format::Json => format!("{}\n", serde_json::to_string_pretty(&report)?),
                Format::Csv => format!("{report}\n"),
            };
            emit(g, &text)?;
            if !report.is_empty() {
                return Err(anyhow!(ValidationFailed(format!("hierarchy is not a clean tree: {report}"))));
            }
        }
        Cmd::Hierarchy(HierarchyCmd::Calibrate { script }) => {
            let dir = out_dir(g)?;
            let graph = load_graph(g, fixtures::raw_graph)?;
            let script = parse_script(&read(&script)?).with_context(|| format!("parsing {}", script.display()))?;
            let out = apply_script(&graph, &script)?;
            write_file(&dir.join("hierarchy.edges"), &out.to_edge_text())?;
            write_file(&dir.join("hierarchy.names"), &out.to_names_text())?;
            let report = out.validate();
            if !report.is_empty() {
                return Err(anyhow!(ValidationFailed(format!("calibrated hierarchy is not clean: {report}"))));
            }
        }
        Cmd::Task(TaskCmd::Make { root, level, subpops, split, name }) => {
            let tree = Tree::new(load_graph(g, fixtures::calibrated_graph)?)?;
            let spec = TaskSpec {
                name,
                subtree_root: NodeId::new(&root).map_err(|e| anyhow!(Usage(e.to_string())))?,
                level,
                subpops_per_superclass: subpops,
                split_strategy: split,
                seed: g.seed,
            };
            let task = make_task(&tree, &spec)?;
            task.check_invariants(&tree)?;
            emit(g, &task.to_json())?;
        }
        Cmd::Task(TaskCmd::Presets { name, split }) => {
            if g.hierarchy.is_some() {
                eprintln!("note: presets always use the shipped hierarchy; --hierarchy ignored");
            }
            let tree = fixtures::calibrated_tree();
            let task = make_task(&tree, &name.spec(split, g.seed))?;
            task.check_invariants(&tree)?;
            emit(g, &task.to_json())?;
        }
        Cmd::Manifest(ManifestCmd::Emit { task, data, domain, split, materialize: link_dir }) => {
            let task = load_task(&task)?;
            let index = scan_dataset(&data)?;
            let m = emit_manifest(&task, &index, domain, split)?;
            let mut buf = Vec::new();
            write_manifest(&m, &mut buf)?;
            emit(g, std::str::from_utf8(&buf)?)?;
            if let Some(dir) = link_dir {
                materialize(&m, &data, &dir)?;
            }
        }
        Cmd::Study(StudyCmd::Make { task, data, control, pairings, context, probes, annotators }) => {
            let dir = out_dir(g)?;
            let task = load_task(&task)?;
            let index = scan_dataset(&data)?;
            let opts = StudyOptions {
                pairings_per_superclass: pairings,
                context_per_group: context,
                probes,
                annotators_per_task: annotators,
                mode: if control { StudyMode::Control } else { StudyMode::Shift },
                seed: g.seed,
            };
            let set = make_human_study_tasks(&task, &index, &opts)?;
            for t in &set.tasks {
                let text = format!("{}\n", serde_json::to_string_pretty(t)?);
                write_file(&dir.join("tasks").join(format!("{}.json", t.task_id)), &text)?;
            }
            let key = serde_json::json!({
                "mode": set.mode,
                "pairs": set.pairs,
                "unique_unordered_pairs": set.unique_unordered_pairs,
                "tasks": set.answer_key,
            });
            write_file(&dir.join("answer_key.json"), &format!("{}\n", serde_json::to_string_pretty(&key)?))?;
        }
        Cmd::Eval(EvalCmd::Score { task, preds, bootstrap, alpha, pairs_per_class, all_pairs, model, mode }) => {
            let task = load_task(&task)?;
            let file = fs::File::open(&preds).with_context(|| format!("reading {}", preds.display()))?;
            let set = read_predictions(file, &task, &model, &mode)?;
            let pairs = if all_pairs {
                PairMode::All
            } else {
                PairMode::PerClass(pairs_per_class.unwrap_or(3))
            };
            let cfg = EvalConfig {
                bootstrap: BootstrapConfig { b: bootstrap, alpha, seed: g.seed, parallel: true },
                pairs: Some(pairs),
            };
            let report = evaluate(&set, &cfg)?;
            let text = match g.format {
                Format::Json => report.to_json(),
                Format::Csv => report.to_csv(),
            };
            emit(g, &text)?;
        }
        Cmd::Eval(EvalCmd::Plotdata { reports, anchor }) => {
            let dir = out_dir(g)?;
            let reports: Vec<EvalReport> = reports
                .iter()
                .map(|p| EvalReport::from_json(&read(p)?).with_context(|| format!("parsing {}", p.display())))
                .collect::<Result<_>>()?;
            write_file(&dir.join("fig3.csv"), &fig3_csv(&reports, anchor.as_deref())?)?;
            write_file(&dir.join("fig4.csv"), &fig4_csv(&reports))?;
        }
    }
    Ok(())
}
