//! Command implementations behind the `jstdiff` binary.
//!
//! Every command reads a CSV with feature columns and two prediction columns,
//! one per model, and writes JSON, DOT or CSV artifacts into an output
//! directory. Outputs contain no timestamps or absolute paths, so identical
//! inputs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use jstdiff::baselines::{direct_dt_rules, separate_rules};
use jstdiff::diffrules::{extract, DiffRuleset};
use jstdiff::dtree::feature_importance;
use jstdiff::jst::{self, export_dot, DivergenceMode, JointSurrogateTree, Model};
use jstdiff::metrics::{evaluate_ruleset, surrogate_fidelity, MetricsReport};
use jstdiff::refine::{refine, RefinementReport};
use jstdiff::tabular::{self, load_csv, preprocess, Dataset, LabelVector, SplitSpec};
use jstdiff::SCHEMA_VERSION;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Input {
        path: PathBuf,
        #[source]
        source: jstdiff::Error,
    },
    #[error(transparent)]
    Core(#[from] jstdiff::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    /// 1 for I/O failures, 2 for bad input or arguments.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Write { .. } | CliError::Read { .. } => 1,
            CliError::Input {
                source: jstdiff::Error::Io { .. },
                ..
            } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "jstdiff", version, about = "Explain where two classifiers disagree")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a joint surrogate tree and its difference rules.
    Build(BuildArgs),
    /// Refine an existing tree on its training data.
    Refine(RefineArgs),
    /// Score a ruleset on labelled data.
    Eval(EvalArgs),
    /// Rules from a baseline method.
    Baseline(BaselineArgs),
    /// Grid over depth, divergence mode, refinement and seed.
    Sweep(SweepArgs),
    /// Render a tree as Graphviz DOT.
    ExportDot(ExportDotArgs),
    /// Per-feature importances of both surrogates.
    Importance(ImportanceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV with feature columns and both prediction columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub pred1: String,
    #[arg(long)]
    pub pred2: String,
    /// Columns to one-hot encode (comma separated or repeated).
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ModeArgs {
    /// Divergence threshold; diverge when imp1 + imp2 <= alpha * joint.
    #[arg(long, conflicts_with = "simplified", allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Diverge as soon as either model has a zero-impurity split (default).
    #[arg(long)]
    pub simplified: bool,
}

impl ModeArgs {
    pub fn mode(&self) -> DivergenceMode {
        match self.alpha {
            Some(alpha) => DivergenceMode::Alpha { alpha },
            None => DivergenceMode::Simplified,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub mode: ModeArgs,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    /// Refinement iterations after building.
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub hide_agreeing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct RefineArgs {
    /// Tree written by `build`.
    #[arg(long)]
    pub jst: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1)]
    pub refine: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub hide_agreeing: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub rules: PathBuf,
    /// Labelled data, typically the `test.csv` written by `build`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub pred1: String,
    #[arg(long)]
    pub pred2: String,
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Also report each surrogate's fidelity.
    #[arg(long)]
    pub jst: Option<PathBuf>,
    /// Directory for metrics.json; defaults to the directory of `--rules`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineKind {
    DirectDt,
    Separate,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[arg(value_enum)]
    pub kind: BaselineKind,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 6)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "6")]
    pub max_depth: Vec<usize>,
    /// Alpha values to sweep.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    /// Include the simplified mode (implied when no alpha is given).
    #[arg(long)]
    pub simplified: bool,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub refine: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
    pub seed: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

impl SweepArgs {
    fn modes(&self) -> Vec<DivergenceMode> {
        let mut modes = Vec::new();
        if self.simplified || self.alpha.is_empty() {
            modes.push(DivergenceMode::Simplified);
        }
        modes.extend(self.alpha.iter().map(|&alpha| DivergenceMode::Alpha { alpha }));
        modes
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExportDotArgs {
    #[arg(long)]
    pub jst: PathBuf,
    #[arg(long)]
    pub hide_agreeing: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub jst: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Build(a) => cmd_build(&a).map(drop),
        Command::Refine(a) => cmd_refine(&a).map(drop),
        Command::Eval(a) => {
            let report = cmd_eval(&a)?;
            println!("{}", summary_line(&report));
            Ok(())
        }
        Command::Baseline(a) => cmd_baseline(&a).map(drop),
        Command::Sweep(a) => cmd_sweep(&a).map(drop),
        Command::ExportDot(a) => cmd_export_dot(&a),
        Command::Importance(a) => cmd_importance(&a),
    }
}

/// Train and test sides of a prepared dataset.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: (Dataset, LabelVector, LabelVector),
    pub test: (Dataset, LabelVector, LabelVector),
}

/// Loads, one-hot encodes, deduplicates and splits the data.
pub fn prepare(args: &DataArgs, seed: u64) -> Result<Prepared> {
    let path = &args.data;
    let input = |source| CliError::Input {
        path: path.clone(),
        source,
    };
    if args.pred1 == args.pred2 {
        return Err(CliError::Usage(
            "--pred1 and --pred2 must name different columns".into(),
        ));
    }
    let categorical: Vec<&str> = args.categorical.iter().map(String::as_str).collect();
    let loaded = load_csv(path, &[&args.pred1, &args.pred2], &categorical).map_err(input)?;
    let pre = preprocess(&loaded.dataset, &categorical).map_err(input)?;
    let labels: Vec<LabelVector> = loaded
        .labels
        .iter()
        .map(|l| l.select(&pre.kept_rows))
        .collect();
    info!(
        "{}: {} rows after deduplication, {} feature columns",
        path.display(),
        pre.dataset.n_rows(),
        pre.dataset.n_cols()
    );
    let spec = SplitSpec::new(args.train_fraction, seed).map_err(input)?;
    let (train, test) = tabular::split(&pre.dataset, &labels, &spec).map_err(input)?;
    let side = |p: tabular::Partition| {
        let mut l = p.labels.into_iter();
        (p.dataset, l.next().unwrap(), l.next().unwrap())
    };
    Ok(Prepared {
        train: side(train),
        test: side(test),
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_owned(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

fn versioned<T: Serialize>(body: &T) -> String {
    to_json(&Versioned {
        schema_version: SCHEMA_VERSION,
        body,
    })
}

fn load_jst(path: &Path) -> Result<JointSurrogateTree> {
    JointSurrogateTree::from_json(&read_file(path)?).map_err(|source| CliError::Input {
        path: path.to_owned(),
        source,
    })
}

fn load_rules(path: &Path) -> Result<DiffRuleset> {
    DiffRuleset::from_json(&read_file(path)?).map_err(|source| CliError::Input {
        path: path.to_owned(),
        source,
    })
}

fn write_test_split(out: &Path, data: &DataArgs, test: &(Dataset, LabelVector, LabelVector)) -> Result<()> {
    let mut buf = Vec::new();
    tabular::write_csv(&mut buf, &test.0, &[(&data.pred1, &test.1), (&data.pred2, &test.2)])
        .map_err(|e| CliError::Usage(format!("cannot encode test split: {e}")))?;
    write_file(&out.join("test.csv"), &String::from_utf8(buf).expect("CSV output is UTF-8"))
}

#[derive(Serialize)]
struct ClassesDoc<'a> {
    prediction_columns: [&'a str; 2],
    classes: &'a [String],
}

/// Writes `jst.json`, `rules.json`, `jst.dot` for `tree`.
fn write_tree_artifacts(out: &Path, tree: &JointSurrogateTree, hide_agreeing: bool) -> Result<DiffRuleset> {
    let rules = extract(tree);
    write_file(&out.join("jst.json"), &format!("{}\n", tree.to_json()))?;
    write_file(&out.join("rules.json"), &format!("{}\n", rules.to_json()))?;
    write_file(
        &out.join("jst.dot"),
        &export_dot(tree, tree.columns(), hide_agreeing),
    )?;
    Ok(rules)
}

pub struct BuildOutput {
    pub tree: JointSurrogateTree,
    pub rules: DiffRuleset,
    pub refinement: Vec<RefinementReport>,
}

fn grow(
    train: &(Dataset, LabelVector, LabelVector),
    data: &DataArgs,
    max_depth: usize,
    mode: DivergenceMode,
    iterations: usize,
) -> Result<(JointSurrogateTree, Vec<RefinementReport>)> {
    let (x, y1, y2) = train;
    let mut tree = jst::build(x, y1, y2, max_depth, mode)?;
    tree.set_prediction_columns(&data.pred1, &data.pred2);
    let (tree, reports) = refine(&tree, x, y1, y2, iterations)?;
    Ok((tree, reports))
}

/// Builds (and optionally refines) on the training split. Writes `jst.json`,
/// `rules.json`, `jst.dot`, the held-out `test.csv` and `classes.json`.
pub fn cmd_build(args: &BuildArgs) -> Result<BuildOutput> {
    let prepared = prepare(&args.data, args.seed)?;
    let mode = args.mode.mode();
    let (tree, refinement) = grow(&prepared.train, &args.data, args.max_depth, mode, args.refine)?;
    for r in &refinement {
        info!(
            "refinement {}: {} leaves split, rules {} -> {}",
            r.iteration, r.leaves_split, r.rules_before, r.rules_after
        );
    }
    let rules = write_tree_artifacts(&args.out, &tree, args.hide_agreeing)?;
    write_test_split(&args.out, &args.data, &prepared.test)?;
    write_file(
        &args.out.join("classes.json"),
        &versioned(&ClassesDoc {
            prediction_columns: [&args.data.pred1, &args.data.pred2],
            classes: tree.classes(),
        }),
    )?;
    if args.refine > 0 {
        write_file(&args.out.join("refinement.json"), &versioned(&RefinementDoc { iterations: &refinement }))?;
    }
    info!(
        "{} nodes, {} or-nodes, {} rules",
        tree.nodes().len(),
        tree.or_nodes().len(),
        rules.rules.len()
    );
    Ok(BuildOutput {
        tree,
        rules,
        refinement,
    })
}

#[derive(Serialize)]
struct RefinementDoc<'a> {
    iterations: &'a [RefinementReport],
}

/// Refines a stored tree. The data flags and seed must reproduce the
/// training split the tree was built on.
pub fn cmd_refine(args: &RefineArgs) -> Result<BuildOutput> {
    let tree = load_jst(&args.jst)?;
    let prepared = prepare(&args.data, args.seed)?;
    let (x, y1, y2) = &prepared.train;
    let (tree, refinement) = refine(&tree, x, y1, y2, args.refine).map_err(|source| CliError::Input {
        path: args.jst.clone(),
        source,
    })?;
    let rules = write_tree_artifacts(&args.out, &tree, args.hide_agreeing)?;
    write_file(&args.out.join("refinement.json"), &versioned(&RefinementDoc { iterations: &refinement }))?;
    Ok(BuildOutput {
        tree,
        rules,
        refinement,
    })
}

/// Columns of `ds` reordered to `columns`. A missing `name=value` indicator
/// column stands for a category absent from `ds` and is filled with zeros.
fn align_columns(ds: &Dataset, columns: &[String]) -> jstdiff::Result<Dataset> {
    let mut sources = Vec::with_capacity(columns.len());
    for c in columns {
        match ds.column_index(c) {
            Some(j) => sources.push(Some(j)),
            None if c.contains('=') => sources.push(None),
            None => return Err(jstdiff::Error::MissingColumn(c.clone())),
        }
    }
    let rows = ds
        .rows()
        .map(|r| sources.iter().map(|s| s.map_or(0.0, |j| r[j])).collect())
        .collect();
    Dataset::new(columns.to_vec(), rows)
}

/// Maps labels onto `classes` by name; unseen names get fresh ids.
fn reencode(y: &LabelVector, classes: &[String]) -> jstdiff::Result<LabelVector> {
    let mut all = classes.to_vec();
    let ids = y
        .labels()
        .iter()
        .map(|&l| {
            let name = y.class_name(l);
            match all.iter().position(|c| c == name) {
                Some(i) => i,
                None => {
                    all.push(name.to_owned());
                    all.len() - 1
                }
            }
        })
        .collect();
    LabelVector::with_classes(ids, all)
}

#[derive(Serialize)]
struct MetricsDoc<'a> {
    #[serde(flatten)]
    report: &'a MetricsReport,
    #[serde(flatten)]
    extra: MetricsExtra,
}

#[derive(Serialize)]
struct MetricsExtra {
    rules_fingerprint: String,
}

/// Scores a ruleset on labelled data and writes `metrics.json`.
pub fn cmd_eval(args: &EvalArgs) -> Result<MetricsReport> {
    let rules = load_rules(&args.rules)?;
    let input = |source| CliError::Input {
        path: args.data.clone(),
        source,
    };
    let categorical: Vec<&str> = args.categorical.iter().map(String::as_str).collect();
    let loaded = load_csv(&args.data, &[&args.pred1, &args.pred2], &categorical).map_err(input)?;
    let (ds, y1, y2) = if categorical.is_empty() {
        let mut l = loaded.labels.into_iter();
        (loaded.dataset, l.next().unwrap(), l.next().unwrap())
    } else {
        let pre = preprocess(&loaded.dataset, &categorical).map_err(input)?;
        (
            pre.dataset,
            loaded.labels[0].select(&pre.kept_rows),
            loaded.labels[1].select(&pre.kept_rows),
        )
    };
    let ds = align_columns(&ds, &rules.columns).map_err(input)?;
    let mut report = evaluate_ruleset(&rules, &ds, &y1, &y2).map_err(input)?;
    if let Some(path) = &args.jst {
        let tree = load_jst(path)?;
        let ds = align_columns(&ds, tree.columns()).map_err(input)?;
        let y1 = reencode(&y1, tree.classes())?;
        let y2 = reencode(&y2, tree.classes())?;
        report.fidelity = Some(surrogate_fidelity(&tree, &ds, &y1, &y2)?);
    }
    let out = match &args.out {
        Some(o) => o.clone(),
        None => args
            .rules
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    write_file(
        &out.join("metrics.json"),
        &versioned(&MetricsDoc {
            report: &report,
            extra: MetricsExtra {
                rules_fingerprint: rules.source.fingerprint.clone(),
            },
        }),
    )?;
    Ok(report)
}

pub fn summary_line(r: &MetricsReport) -> String {
    format!(
        "{}: Pr={:.4} Re={:.4} F1={:.4} #r={} #p={} diffs={:.4}",
        r.method,
        r.metrics.precision,
        r.metrics.recall,
        r.metrics.f1,
        r.counts.num_rules,
        r.counts.num_predicates_global,
        r.metrics.diff_rate
    )
}

/// Baseline rules on the training split; writes `rules.json` and `test.csv`.
pub fn cmd_baseline(args: &BaselineArgs) -> Result<DiffRuleset> {
    let prepared = prepare(&args.data, args.seed)?;
    let (x, y1, y2) = &prepared.train;
    let mut rules = match args.kind {
        BaselineKind::DirectDt => direct_dt_rules(x, y1, y2, args.max_depth)?,
        BaselineKind::Separate => separate_rules(x, y1, y2, args.max_depth)?,
    };
    rules.source.prediction_columns = [args.data.pred1.clone(), args.data.pred2.clone()];
    write_file(&args.out.join("rules.json"), &format!("{}\n", rules.to_json()))?;
    write_test_split(&args.out, &args.data, &prepared.test)?;
    Ok(rules)
}

/// One sweep cell: a configuration evaluated on one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub max_depth: usize,
    pub mode: String,
    pub refine: usize,
    pub seed: u64,
    pub diff_rate: f64,
    pub imd_precision: f64,
    pub imd_recall: f64,
    pub imd_f1: f64,
    pub imd_rules: usize,
    pub imd_predicates: usize,
    pub imd_fidelity1: f64,
    pub imd_fidelity2: f64,
    pub separate_precision: f64,
    pub separate_recall: f64,
    pub separate_f1: f64,
    pub separate_rules: usize,
    pub separate_predicates: usize,
    pub direct_precision: f64,
    pub direct_recall: f64,
    pub direct_f1: f64,
    pub direct_rules: usize,
    pub direct_predicates: usize,
}

const SUMMARY_METRICS: [&str; 18] = [
    "diff_rate",
    "imd_precision",
    "imd_recall",
    "imd_f1",
    "imd_rules",
    "imd_predicates",
    "imd_fidelity1",
    "imd_fidelity2",
    "separate_precision",
    "separate_recall",
    "separate_f1",
    "separate_rules",
    "separate_predicates",
    "direct_precision",
    "direct_recall",
    "direct_f1",
    "direct_rules",
    "direct_predicates",
];

impl SweepRow {
    fn values(&self) -> [f64; 18] {
        [
            self.diff_rate,
            self.imd_precision,
            self.imd_recall,
            self.imd_f1,
            self.imd_rules as f64,
            self.imd_predicates as f64,
            self.imd_fidelity1,
            self.imd_fidelity2,
            self.separate_precision,
            self.separate_recall,
            self.separate_f1,
            self.separate_rules as f64,
            self.separate_predicates as f64,
            self.direct_precision,
            self.direct_recall,
            self.direct_f1,
            self.direct_rules as f64,
            self.direct_predicates as f64,
        ]
    }
}

fn sweep_cell(
    prepared: &Prepared,
    data: &DataArgs,
    max_depth: usize,
    mode: DivergenceMode,
    iterations: usize,
    seed: u64,
) -> Result<SweepRow> {
    let (x, y1, y2) = &prepared.train;
    let (tx, ty1, ty2) = &prepared.test;
    let (tree, _) = grow(&prepared.train, data, max_depth, mode, iterations)?;
    let imd = evaluate_ruleset(&extract(&tree), tx, ty1, ty2)?;
    let fid = surrogate_fidelity(&tree, tx, ty1, ty2)?;
    let sep = evaluate_ruleset(&separate_rules(x, y1, y2, max_depth)?, tx, ty1, ty2)?;
    let direct = evaluate_ruleset(&direct_dt_rules(x, y1, y2, max_depth)?, tx, ty1, ty2)?;
    Ok(SweepRow {
        max_depth,
        mode: mode.to_string(),
        refine: iterations,
        seed,
        diff_rate: imd.metrics.diff_rate,
        imd_precision: imd.metrics.precision,
        imd_recall: imd.metrics.recall,
        imd_f1: imd.metrics.f1,
        imd_rules: imd.counts.num_rules,
        imd_predicates: imd.counts.num_predicates_global,
        imd_fidelity1: fid.model1,
        imd_fidelity2: fid.model2,
        separate_precision: sep.metrics.precision,
        separate_recall: sep.metrics.recall,
        separate_f1: sep.metrics.f1,
        separate_rules: sep.counts.num_rules,
        separate_predicates: sep.counts.num_predicates_global,
        direct_precision: direct.metrics.precision,
        direct_recall: direct.metrics.recall,
        direct_f1: direct.metrics.f1,
        direct_rules: direct.counts.num_rules,
        direct_predicates: direct.counts.num_predicates_global,
    })
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs every (depth, mode, refinement, seed) cell on up to `--jobs` threads.
/// Writes `sweep.csv` with one row per cell, in grid order, and
/// `sweep_summary.csv` with the mean and population standard deviation over
/// seeds of each configuration.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Vec<SweepRow>> {
    let modes = args.modes();
    if args.max_depth.is_empty() || args.refine.is_empty() || args.seed.is_empty() {
        return Err(CliError::Usage("sweep grids must be non-empty".into()));
    }
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let splits = args
        .seed
        .iter()
        .map(|&s| prepare(&args.data, s))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    for &d in &args.max_depth {
        for &m in &modes {
            for &r in &args.refine {
                for (k, &s) in args.seed.iter().enumerate() {
                    cells.push((d, m, r, k, s));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(d, m, r, k, s)| sweep_cell(&splits[k], &args.data, d, m, r, s))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).expect("in-memory CSV");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8");
    write_file(&args.out.join("sweep.csv"), &text)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["max_depth".to_owned(), "mode".into(), "refine".into(), "seeds".into()];
    for m in SUMMARY_METRICS {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header).expect("in-memory CSV");
    for group in rows.chunks(args.seed.len()) {
        let first = &group[0];
        let mut rec = vec![
            first.max_depth.to_string(),
            first.mode.clone(),
            first.refine.to_string(),
            group.len().to_string(),
        ];
        let values: Vec<[f64; 18]> = group.iter().map(SweepRow::values).collect();
        for i in 0..SUMMARY_METRICS.len() {
            let col: Vec<f64> = values.iter().map(|v| v[i]).collect();
            let (mean, std) = mean_std(&col);
            rec.push(mean.to_string());
            rec.push(std.to_string());
        }
        w.write_record(&rec).expect("in-memory CSV");
    }
    let text = String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8");
    write_file(&args.out.join("sweep_summary.csv"), &text)?;
    Ok(rows)
}

pub fn cmd_export_dot(args: &ExportDotArgs) -> Result<()> {
    let tree = load_jst(&args.jst)?;
    let dot = export_dot(&tree, tree.columns(), args.hide_agreeing);
    match &args.out {
        Some(p) => write_file(p, &dot),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Importances {
    pub columns: Vec<String>,
    pub model1: Vec<f64>,
    pub model2: Vec<f64>,
}

pub fn importances(tree: &JointSurrogateTree) -> Importances {
    Importances {
        columns: tree.columns().to_vec(),
        model1: feature_importance(&tree.surrogate(Model::First)),
        model2: feature_importance(&tree.surrogate(Model::Second)),
    }
}

pub fn cmd_importance(args: &ImportanceArgs) -> Result<()> {
    let tree = load_jst(&args.jst)?;
    let text = versioned(&importances(&tree));
    match &args.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
