//! Subcommand implementations. Each one reads its inputs, writes its
//! outputs and a manifest into `--out`, and reports per-record failures
//! instead of stopping at the first one.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use fallacy_tree_core::corpus::{parse_corpus, parse_trees, tokenize, CorpusRecord, Split, TreeGroup};
use fallacy_tree_core::corpus_stats::{class_distribution, ClassGrouping, PresenceMode, Sample};
use fallacy_tree_core::eval_metrics::{
    classification_metrics, detection_metrics, unify_label, DetectionLabel, LabelMap, MetricsReport,
};
use fallacy_tree_core::llm_gateway::{
    parse_classification, parse_detection, AuditLog, Client, GatewayConfig, GatewayError, ReplayLog,
};
use fallacy_tree_core::textualizer::{
    build_classification_prompt_with, build_detection_prompt_with, render_table, to_triplets, CotExample, Dataset,
    FallacyCatalog, PromptOptions, TripletTable,
};
use fallacy_tree_core::tree_encoder::{encode_tree, grad_check, init_params, project, EncoderParams, VectorTable};
use fallacy_tree_core::{build_logic_tree, LogicTree, RelationType, Taxonomy};

use crate::manifest::{to_jsonl, Outcome, Run, Severity};
use crate::synth;

pub const LOGIC_TREES_FILE: &str = "logic_trees.jsonl";
pub const TEXTUALIZED_FILE: &str = "textualized.jsonl";
pub const PRESENCE_FILE: &str = "relation_presence.csv";
pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";
pub const PARAMS_FILE: &str = "params.json";
pub const GRAD_CHECK_FILE: &str = "grad_check.jsonl";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_TXT: &str = "metrics.txt";
pub const OUTCOMES_FILE: &str = "outcomes.jsonl";
pub const EXCHANGES_FILE: &str = "exchanges.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detection,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Grouping {
    /// One row per fallacy label.
    Label,
    /// Fallacy vs no fallacy.
    Binary,
}

impl From<Grouping> for ClassGrouping {
    fn from(g: Grouping) -> Self {
        match g {
            Grouping::Label => ClassGrouping::Label,
            Grouping::Binary => ClassGrouping::Binary,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CommonArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for every random choice the command makes.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; all cores when omitted.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl CommonArgs {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        CommonArgs {
            out: out.into(),
            seed: 0,
            jobs: None,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .context("starting worker pool")
    }
}

/// Where logic trees come from: constituency trees built on the fly, or
/// the output of `build`.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TreeSource {
    /// Bracketed constituency trees, one `id<TAB>tree` per line.
    #[arg(long, conflicts_with = "logic_trees")]
    pub trees: Option<PathBuf>,
    /// Logic trees written by `build`.
    #[arg(long)]
    pub logic_trees: Option<PathBuf>,
    /// Taxonomy file replacing the built-in connective table.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

/// One line of a logic-trees file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub tree: LogicTree,
}

fn load_taxonomy(path: Option<&Path>, run: &mut Run) -> Result<Taxonomy> {
    let tax = match path {
        Some(p) => {
            let text = run.read_input(p)?;
            Taxonomy::parse(&text).with_context(|| format!("taxonomy {}", p.display()))?
        }
        None => Taxonomy::builtin(),
    };
    run.set_taxonomy_digest(tax.digest());
    Ok(tax)
}

fn load_catalog(path: Option<&Path>, run: &mut Run) -> Result<FallacyCatalog> {
    match path {
        Some(p) => {
            let text = run.read_input(p)?;
            FallacyCatalog::from_json(&text).with_context(|| format!("catalog {}", p.display()))
        }
        None => Ok(FallacyCatalog::builtin()),
    }
}

fn load_corpus(path: &Path, split: Option<Split>, run: &mut Run) -> Result<Vec<CorpusRecord>> {
    let text = run.read_input(path)?;
    let records = parse_corpus(&text).with_context(|| format!("corpus {}", path.display()))?;
    Ok(records.into_iter().filter(|r| split.is_none_or(|s| r.split == s)).collect())
}

type Built = Vec<(String, Result<LogicTree, String>)>;

fn build_groups(groups: &[TreeGroup], tax: &Taxonomy, pool: &rayon::ThreadPool) -> Built {
    pool.install(|| {
        groups
            .par_iter()
            .map(|g| {
                let tree = g
                    .trees()
                    .map(|t| build_logic_tree(&t, tax))
                    .map_err(|(line, e)| format!("line {line}: {e}"));
                (g.id.clone(), tree)
            })
            .collect()
    })
}

fn load_trees_file(path: &Path, tax_path: Option<&Path>, run: &mut Run, pool: &rayon::ThreadPool) -> Result<Built> {
    let tax = load_taxonomy(tax_path, run)?;
    let text = run.read_input(path)?;
    Ok(build_groups(&parse_trees(&text), &tax, pool))
}

fn load_source(src: &TreeSource, run: &mut Run, pool: &rayon::ThreadPool) -> Result<Built> {
    match (&src.trees, &src.logic_trees) {
        (Some(path), None) => load_trees_file(path, src.taxonomy.as_deref(), run, pool),
        (None, Some(path)) => {
            let text = run.read_input(path)?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(i, line)| {
                    let rec: LogicRecord = serde_json::from_str(line)
                        .with_context(|| format!("{} line {}", path.display(), i + 1))?;
                    Ok((rec.id, Ok(rec.tree)))
                })
                .collect()
        }
        (None, None) => bail!("one of --trees or --logic-trees is required"),
        (Some(_), Some(_)) => bail!("--trees and --logic-trees are mutually exclusive"),
    }
}

fn relation_counts<'a>(trees: impl Iterator<Item = &'a LogicTree>) -> BTreeMap<&'static str, usize> {
    let mut counts: BTreeMap<&'static str, usize> = RelationType::ALL.iter().map(|r| (r.name(), 0)).collect();
    for t in trees {
        for (rel, _) in t.relations() {
            *counts.get_mut(rel.name()).unwrap() += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Bracketed constituency trees, one `id<TAB>tree` per line.
    #[arg(long)]
    pub trees: PathBuf,
    /// Corpus JSONL; when given, record ids must match the trees file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Taxonomy file replacing the built-in connective table.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

pub fn cmd_build(args: &BuildArgs) -> Result<Outcome> {
    let mut run = Run::start("build", &args.common.out, args.common.seed, args)?;
    let pool = args.common.pool()?;
    let built = load_trees_file(&args.trees, args.taxonomy.as_deref(), &mut run, &pool)?;
    let corpus: Option<HashMap<String, CorpusRecord>> = match &args.corpus {
        Some(p) => Some(load_corpus(p, None, &mut run)?.into_iter().map(|r| (r.id.clone(), r)).collect()),
        None => None,
    };

    let mut rows = Vec::new();
    for (id, tree) in built.iter() {
        let meta = corpus.as_ref().map(|c| c.get(id));
        if let Some(None) = meta {
            run.fail(id, Severity::Fatal, "record id not in corpus");
            continue;
        }
        match tree {
            Ok(tree) => rows.push(LogicRecord {
                id: id.clone(),
                label: meta.flatten().map(|r| r.label.clone()),
                split: meta.flatten().map(|r| r.split),
                tree: tree.clone(),
            }),
            Err(e) => run.fail(id, Severity::Fatal, format!("unparseable tree: {e}")),
        }
    }
    if let Some(corpus) = &corpus {
        let mut missing: Vec<&String> = corpus.keys().filter(|id| !built.iter().any(|(b, _)| b == *id)).collect();
        missing.sort();
        for id in missing {
            run.fail(id, Severity::Fatal, "no trees for record");
        }
    }

    run.write_output(LOGIC_TREES_FILE, &to_jsonl(&rows)?)?;
    let summary = json!({
        "trees": rows.len(),
        "leaf_only": rows.iter().filter(|r| r.tree.root.is_leaf()).count(),
        "internal_nodes": relation_counts(rows.iter().map(|r| &r.tree)),
    });
    let records = built.len().max(corpus.map_or(0, |c| c.len()));
    run.finish(records, summary)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TextualizeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: TreeSource,
    /// Corpus JSONL supplying statement text for prompts.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Also build the instruction prompt for this dataset.
    #[arg(long)]
    pub dataset: Option<Dataset>,
    #[arg(long, value_enum, default_value = "detection")]
    pub task: Task,
    /// Insert the triplet table into prompts.
    #[arg(long)]
    pub with_tree: bool,
    /// Fallacy catalog JSON replacing the built-in definitions.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TextualizedRecord {
    pub id: String,
    pub triplets: TripletTable,
    pub table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

fn prompt_for(
    task: Task,
    text: &str,
    table: &TripletTable,
    catalog: &FallacyCatalog,
    dataset: Dataset,
    options: &PromptOptions,
) -> Result<String> {
    Ok(match task {
        Task::Detection => build_detection_prompt_with(text, table, catalog, dataset, options)?,
        Task::Classification => build_classification_prompt_with(text, table, catalog, dataset, options)?,
    })
}

fn check_task(task: Task, dataset: Dataset) -> Result<()> {
    if task == Task::Detection && !dataset.supports_detection() {
        bail!("dataset {dataset} has no detection labels");
    }
    Ok(())
}

pub fn cmd_textualize(args: &TextualizeArgs) -> Result<Outcome> {
    let mut run = Run::start("textualize", &args.common.out, args.common.seed, args)?;
    let pool = args.common.pool()?;
    if let Some(d) = args.dataset {
        check_task(args.task, d)?;
    }
    let catalog = load_catalog(args.catalog.as_deref(), &mut run)?;
    let built = load_source(&args.source, &mut run, &pool)?;
    let texts: HashMap<String, String> = match &args.corpus {
        Some(p) => load_corpus(p, None, &mut run)?.into_iter().map(|r| (r.id, r.text)).collect(),
        None => HashMap::new(),
    };
    let options = PromptOptions::with_tree(args.with_tree);

    let mut rows = Vec::new();
    for (id, tree) in &built {
        let tree = match tree {
            Ok(t) => t,
            Err(e) => {
                run.fail(id, Severity::Fatal, format!("unparseable tree: {e}"));
                continue;
            }
        };
        let triplets = to_triplets(tree);
        let table = render_table(&triplets);
        let prompt = match args.dataset {
            Some(dataset) => {
                let text = texts.get(id).cloned().unwrap_or_else(|| tree.tokens.join(" "));
                Some(prompt_for(args.task, &text, &triplets, &catalog, dataset, &options)?)
            }
            None => None,
        };
        rows.push(TextualizedRecord {
            id: id.clone(),
            triplets,
            table,
            prompt,
        });
    }
    run.write_output(TEXTUALIZED_FILE, &to_jsonl(&rows)?)?;
    let summary = json!({
        "records": rows.len(),
        "rows": rows.iter().map(|r| r.triplets.len()).sum::<usize>(),
    });
    run.finish(built.len(), summary)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Corpus JSONL with `id`, `text`, `label` and `split` per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Constituency trees; required for `--mode tree`, and supply the
    /// tokenization for `--mode raw` when given.
    #[arg(long)]
    pub trees: Option<PathBuf>,
    /// Taxonomy file replacing the built-in connective table.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// `tree` counts relations anchored in logic trees, `raw` any connective occurrence.
    #[arg(long, default_value = "tree")]
    pub mode: PresenceMode,
    /// Dataset name written into the table.
    #[arg(long, default_value = "corpus")]
    pub dataset: String,
    #[arg(long, value_enum, default_value = "label")]
    pub grouping: Grouping,
    /// Only count records of this split.
    #[arg(long)]
    pub split: Option<Split>,
}

pub fn cmd_stats(args: &StatsArgs) -> Result<Outcome> {
    let mut run = Run::start("stats", &args.common.out, args.common.seed, args)?;
    let pool = args.common.pool()?;
    let tax = load_taxonomy(args.taxonomy.as_deref(), &mut run)?;
    let records = load_corpus(&args.corpus, args.split, &mut run)?;
    let built: HashMap<String, Result<LogicTree, String>> = match &args.trees {
        Some(p) => {
            let text = run.read_input(p)?;
            build_groups(&parse_trees(&text), &tax, &pool).into_iter().collect()
        }
        None if args.mode == PresenceMode::Tree => bail!("--mode tree needs --trees"),
        None => HashMap::new(),
    };

    let fallback: Vec<Vec<String>> = records.iter().map(|r| tokenize(&r.text)).collect();
    let mut samples = Vec::new();
    for (rec, fallback_tokens) in records.iter().zip(&fallback) {
        let tree = match built.get(&rec.id) {
            Some(Ok(t)) => Some(t),
            Some(Err(e)) => {
                run.fail(&rec.id, Severity::Fatal, format!("unparseable tree: {e}"));
                continue;
            }
            None if args.mode == PresenceMode::Tree => {
                run.fail(&rec.id, Severity::Fatal, "no trees for record");
                continue;
            }
            None => None,
        };
        samples.push(Sample {
            id: &rec.id,
            label: &rec.label,
            tokens: tree.map_or(fallback_tokens.as_slice(), |t| t.tokens.as_slice()),
            tree,
        });
    }
    let table = class_distribution(&args.dataset, &samples, &tax, args.mode, args.grouping.into())?;
    run.write_output(PRESENCE_FILE, &table.to_csv())?;
    let summary = json!({
        "samples": samples.len(),
        "classes": table.rows.len(),
        "mode": args.mode,
    });
    run.finish(records.len(), summary)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub source: TreeSource,
    /// Word-vector text file (`token c1 c2 ...` per line).
    #[arg(long)]
    pub vectors: PathBuf,
    /// Encoder parameters; freshly initialized from `--seed` when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Projection width for fresh parameters; defaults to the vector width.
    #[arg(long)]
    pub d_prime: Option<usize>,
    /// Gradient-check probes per tree (0 skips the check).
    #[arg(long, default_value_t = 0)]
    pub grad_check: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    /// Root embedding, width d.
    pub embedding: Vec<f64>,
    /// Projected soft prompt, width d'.
    pub soft_prompt: Vec<f64>,
}

pub fn cmd_encode(args: &EncodeArgs) -> Result<Outcome> {
    let mut run = Run::start("encode", &args.common.out, args.common.seed, args)?;
    let pool = args.common.pool()?;
    let built = load_source(&args.source, &mut run, &pool)?;
    let table = VectorTable::parse(&run.read_input(&args.vectors)?)
        .with_context(|| format!("vectors {}", args.vectors.display()))?;
    let params = match &args.params {
        Some(p) => EncoderParams::from_json(&run.read_input(p)?).with_context(|| format!("params {}", p.display()))?,
        None => {
            let p = init_params(args.common.seed, table.dim(), args.d_prime.unwrap_or(table.dim()))?;
            run.write_output(PARAMS_FILE, &p.to_json()?)?;
            p
        }
    };
    if params.d != table.dim() {
        bail!("parameters expect d={} but vectors have d={}", params.d, table.dim());
    }

    let seed = args.common.seed;
    type Encoded = Result<(EmbeddingRecord, Option<Value>), String>;
    let results: Vec<(String, Encoded)> = pool.install(|| {
        built
            .par_iter()
            .enumerate()
            .map(|(i, (id, tree))| {
                let out = tree.as_ref().map_err(|e| format!("unparseable tree: {e}")).and_then(|tree| {
                    let root = encode_tree(tree, &params, &table).map_err(|e| e.to_string())?;
                    let soft = project(&root, &params).map_err(|e| e.to_string())?;
                    let check = if args.grad_check > 0 {
                        let report = grad_check(tree, &params, &table, args.epsilon, args.grad_check, seed.wrapping_add(i as u64))
                            .map_err(|e| e.to_string())?;
                        Some(json!({"id": id, "report": report}))
                    } else {
                        None
                    };
                    Ok((
                        EmbeddingRecord {
                            id: id.clone(),
                            embedding: root.iter().copied().collect(),
                            soft_prompt: soft.iter().copied().collect(),
                        },
                        check,
                    ))
                });
                (id.clone(), out)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for (id, r) in results {
        match r {
            Ok((row, check)) => {
                rows.push(row);
                checks.extend(check);
            }
            Err(e) => run.fail(&id, Severity::Fatal, e),
        }
    }
    run.write_output(EMBEDDINGS_FILE, &to_jsonl(&rows)?)?;
    let mut summary = json!({"records": rows.len(), "d": params.d, "d_prime": params.d_prime});
    if args.grad_check > 0 {
        let max = checks
            .iter()
            .filter_map(|c| c["report"]["max_relative_error"].as_f64())
            .fold(0.0, f64::max);
        summary["max_relative_error"] = json!(max);
        run.write_output(GRAD_CHECK_FILE, &to_jsonl(&checks)?)?;
    }
    run.finish(built.len(), summary)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSONL with `id`, `prediction` and optionally `gold`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Corpus supplying gold labels for predictions without `gold`.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "detection")]
    pub task: Task,
    /// Fallacy catalog JSON replacing the built-in definitions.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

/// Detection label from a prediction or gold string: yes/no, the label
/// names, or a fallacy type.
pub fn detection_label(s: &str) -> DetectionLabel {
    match s.trim().to_lowercase().as_str() {
        "yes" | "fallacy" => DetectionLabel::Fallacy,
        "no" | "no_fallacy" => DetectionLabel::NoFallacy,
        _ => DetectionLabel::from_label(s),
    }
}

fn score(task: Task, preds: &[String], golds: &[String], map: &LabelMap) -> Result<MetricsReport> {
    Ok(match task {
        Task::Detection => {
            let p: Vec<DetectionLabel> = preds.iter().map(|s| detection_label(s)).collect();
            let g: Vec<DetectionLabel> = golds.iter().map(|s| detection_label(s)).collect();
            detection_metrics(&p, &g)?
        }
        Task::Classification => classification_metrics(preds, golds, map)?,
    })
}

fn write_metrics(run: &mut Run, report: &MetricsReport) -> Result<Value> {
    run.write_output(METRICS_JSON, &(serde_json::to_string_pretty(report)? + "\n"))?;
    run.write_output(METRICS_TXT, &report.to_table())?;
    Ok(json!({
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "accuracy": report.accuracy,
        "total": report.total,
    }))
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Outcome> {
    let mut run = Run::start("eval", &args.common.out, args.common.seed, args)?;
    let catalog = load_catalog(args.catalog.as_deref(), &mut run)?;
    let map = LabelMap::from_catalog(&catalog);
    let text = run.read_input(&args.predictions)?;
    let gold_labels: HashMap<String, String> = match &args.corpus {
        Some(p) => load_corpus(p, None, &mut run)?.into_iter().map(|r| (r.id, r.label)).collect(),
        None => HashMap::new(),
    };
    let mut preds = Vec::new();
    let mut golds = Vec::new();
    let mut records = 0;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        records += 1;
        let rec: PredictionRecord = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                run.fail(&format!("line-{}", i + 1), Severity::Fatal, e.to_string());
                continue;
            }
        };
        match rec.gold.or_else(|| gold_labels.get(&rec.id).cloned()) {
            Some(g) => {
                preds.push(rec.prediction);
                golds.push(g);
            }
            None => run.fail(&rec.id, Severity::Fatal, "no gold label"),
        }
    }
    let report = score(args.task, &preds, &golds, &map)?;
    let summary = write_metrics(&mut run, &report)?;
    run.finish(records, summary)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ZeroshotArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Corpus JSONL with `id`, `text`, `label` and `split` per line.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Constituency trees, needed with `--with-tree`.
    #[arg(long)]
    pub trees: Option<PathBuf>,
    /// Taxonomy file replacing the built-in connective table.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    /// argotario, reddit, climate or logic.
    #[arg(long)]
    pub dataset: Dataset,
    #[arg(long, value_enum, default_value = "detection")]
    pub task: Task,
    /// Insert the triplet table into every prompt.
    #[arg(long)]
    pub with_tree: bool,
    /// Only run records of this split.
    #[arg(long)]
    pub split: Option<Split>,
    /// Chat-completion base URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "gpt-3.5-turbo")]
    pub model: String,
    /// Environment variable holding the bearer token; empty for none.
    #[arg(long, default_value = "OPENAI_API_KEY")]
    pub auth_env: String,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Cap on generated tokens per answer.
    #[arg(long)]
    pub max_tokens: Option<u32>,
    #[arg(long, default_value_t = 4)]
    pub max_concurrent: usize,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    /// Re-score logged responses instead of calling the endpoint.
    #[arg(long, conflicts_with = "endpoint")]
    pub replay: Option<PathBuf>,
    /// JSON worked example enabling the step-by-step prompt.
    #[arg(long)]
    pub cot_example: Option<PathBuf>,
    /// Fallacy catalog JSON replacing the built-in definitions.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroshotOutcome {
    pub id: String,
    pub gold: String,
    pub prediction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn cmd_zeroshot(args: &ZeroshotArgs) -> Result<Outcome> {
    let mut run = Run::start("zeroshot", &args.common.out, args.common.seed, args)?;
    check_task(args.task, args.dataset)?;
    let pool = args.common.pool()?;
    let catalog = load_catalog(args.catalog.as_deref(), &mut run)?;
    let map = LabelMap::from_catalog(&catalog);
    let records = load_corpus(&args.corpus, args.split, &mut run)?;
    let trees: HashMap<String, Result<LogicTree, String>> = match (&args.trees, args.with_tree) {
        (Some(p), true) => load_trees_file(p, args.taxonomy.as_deref(), &mut run, &pool)?.into_iter().collect(),
        (None, true) => bail!("--with-tree needs --trees"),
        (_, false) => HashMap::new(),
    };
    let options = PromptOptions {
        with_tree: args.with_tree,
        chain_of_thought: match &args.cot_example {
            Some(p) => {
                let ex: CotExample = serde_json::from_str(&run.read_input(p)?)
                    .with_context(|| format!("example {}", p.display()))?;
                Some(ex)
            }
            None => None,
        },
    };

    let mut prompts: Vec<(String, Result<String, String>)> = Vec::new();
    for rec in &records {
        let table = match trees.get(&rec.id) {
            Some(Ok(t)) => Ok(to_triplets(t)),
            Some(Err(e)) => Err(format!("unparseable tree: {e}")),
            None if args.with_tree => Err("no trees for record".to_string()),
            None => Ok(TripletTable::default()),
        };
        let prompt = table.and_then(|t| {
            prompt_for(args.task, &rec.text, &t, &catalog, args.dataset, &options).map_err(|e| e.to_string())
        });
        prompts.push((rec.id.clone(), prompt));
    }

    let responses: Vec<Result<String, String>> = match (&args.replay, &args.endpoint) {
        (Some(path), _) => {
            let log = ReplayLog::parse(&run.read_input(path)?)?;
            prompts
                .iter()
                .map(|(id, p)| p.clone().and_then(|_| log.response(id).map_err(|e| e.to_string())))
                .collect()
        }
        (None, Some(endpoint)) => {
            let config = GatewayConfig {
                endpoint: endpoint.clone(),
                model: args.model.clone(),
                auth_env: Some(args.auth_env.clone()).filter(|s| !s.is_empty()),
                temperature: args.temperature,
                max_tokens: args.max_tokens,
                timeout: Duration::from_secs_f64(args.timeout),
                max_concurrent: args.max_concurrent,
                max_retries: args.retries,
                backoff: Duration::from_millis(500),
            };
            let client = Client::new(config)?;
            let ready: Vec<(String, String)> = prompts
                .iter()
                .filter_map(|(id, p)| p.as_ref().ok().map(|p| (id.clone(), p.clone())))
                .collect();
            let log = AuditLog::create(&run.out_dir().join(EXCHANGES_FILE))?;
            let mut answers = client.complete_batch(&ready, Some(&log)).into_iter();
            drop(log);
            let mut out = Vec::new();
            for (_, p) in &prompts {
                out.push(match p {
                    Ok(_) => answers
                        .next()
                        .expect("one answer per prompt")
                        .map_err(|e: GatewayError| e.to_string()),
                    Err(e) => Err(e.clone()),
                });
            }
            log::info!("{} requests sent", client.request_count());
            out
        }
        (None, None) => bail!("one of --endpoint or --replay is required"),
    };

    let mut outcomes = Vec::new();
    for (rec, response) in records.iter().zip(responses) {
        let gold = match args.task {
            Task::Detection => DetectionLabel::from_label(&rec.label).name().to_string(),
            Task::Classification => unify_label(&rec.label, &map),
        };
        let (prediction, diagnostic) = match (&response, args.task) {
            (Ok(answer), Task::Detection) => {
                let p = parse_detection(answer);
                (p.label.name().to_string(), p.diagnostic)
            }
            (Ok(answer), Task::Classification) => {
                let p = parse_classification(answer, &catalog, &map);
                (p.label, p.diagnostic)
            }
            (Err(_), Task::Detection) => (DetectionLabel::NoFallacy.name().to_string(), None),
            (Err(_), Task::Classification) => (fallacy_tree_core::llm_gateway::UNPARSED.to_string(), None),
        };
        if let Err(e) = &response {
            run.fail(&rec.id, Severity::Fatal, e.clone());
        }
        if let Some(d) = &diagnostic {
            run.fail(&rec.id, Severity::Soft, d.clone());
        }
        outcomes.push(ZeroshotOutcome {
            id: rec.id.clone(),
            gold,
            prediction,
            response: response.as_ref().ok().cloned(),
            diagnostic,
            error: response.err(),
        });
    }
    if args.replay.is_none() {
        let log_text = std::fs::read_to_string(run.out_dir().join(EXCHANGES_FILE))?;
        run.write_output(EXCHANGES_FILE, &log_text)?;
    }
    run.write_output(OUTCOMES_FILE, &to_jsonl(&outcomes)?)?;
    if outcomes.is_empty() {
        return Err(anyhow!("no records to score"));
    }
    let preds: Vec<String> = outcomes.iter().map(|o| o.prediction.clone()).collect();
    let golds: Vec<String> = outcomes.iter().map(|o| o.gold.clone()).collect();
    let report = score(args.task, &preds, &golds, &map)?;
    let summary = write_metrics(&mut run, &report)?;
    run.finish(records.len(), summary)
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Taxonomy whose phrases are planted.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

pub const SYNTH_TREES: &str = "trees.tsv";
pub const SYNTH_CORPUS: &str = "corpus.jsonl";
pub const SYNTH_PLANTED: &str = "planted.jsonl";

pub fn cmd_synth(args: &SynthArgs) -> Result<Outcome> {
    let mut run = Run::start("synth", &args.common.out, args.common.seed, args)?;
    let tax = load_taxonomy(args.taxonomy.as_deref(), &mut run)?;
    let statements = synth::generate(&tax, args.count, args.common.seed);
    let trees: String = statements.iter().map(|s| s.tree_lines()).collect();
    let corpus: Vec<CorpusRecord> = statements.iter().map(|s| s.record()).collect();
    let planted: Vec<Value> = statements
        .iter()
        .map(|s| json!({"id": s.id, "connectives": s.planted}))
        .collect();
    run.write_output(SYNTH_TREES, &trees)?;
    run.write_output(SYNTH_CORPUS, &to_jsonl(&corpus)?)?;
    run.write_output(SYNTH_PLANTED, &to_jsonl(&planted)?)?;
    run.finish(statements.len(), json!({"statements": statements.len()}))
}
