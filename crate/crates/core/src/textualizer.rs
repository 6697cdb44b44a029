//! Triplet tables and instruction prompts.
//!
//! A logical structure tree is flattened into (left argument, relation
//! connective, right argument) rows, deepest relations first, and spliced
//! into the detection and classification instruction templates together with
//! the fallacy definitions of the chosen dataset.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic_tree::{LogicNode, LogicTree};
use crate::taxonomy::RelationType;

pub const TABLE_HEADER: &str = "argument 1, logical relation, argument 2";

const BUILTIN_CATALOG: &str = include_str!("../data/fallacies.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub left_text: String,
    pub relation: RelationType,
    pub connective: String,
    pub right_text: String,
    pub depth: usize,
    /// First token of the connective; orders rows of equal depth.
    pub position: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TripletTable {
    pub rows: Vec<Triplet>,
}

impl TripletTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// One row per relation, deepest first; ties read left to right.
pub fn to_triplets(tree: &LogicTree) -> TripletTable {
    let mut rows = Vec::new();
    collect(tree, &tree.root, 0, &mut rows);
    rows.sort_by(|a, b| b.depth.cmp(&a.depth).then(a.position.cmp(&b.position)));
    TripletTable { rows }
}

fn collect(tree: &LogicTree, node: &LogicNode, depth: usize, rows: &mut Vec<Triplet>) {
    if let LogicNode::Internal {
        relation,
        connective,
        connective_span,
        left,
        right,
        ..
    } = node
    {
        rows.push(Triplet {
            left_text: tree.text(left.region()),
            relation: *relation,
            connective: connective.clone(),
            right_text: tree.text(right.region()),
            depth,
            position: connective_span.start,
        });
        collect(tree, left, depth + 1, rows);
        collect(tree, right, depth + 1, rows);
    }
}

/// Header line, then `<left> | <relation> (<connective>) | <right>` per row,
/// or `none` for an empty table.
pub fn render_table(table: &TripletTable) -> String {
    let mut lines = vec![TABLE_HEADER.to_string()];
    if table.is_empty() {
        lines.push("none".to_string());
    }
    for row in &table.rows {
        lines.push(format!(
            "{} | {} ({}) | {}",
            row.left_text, row.relation, row.connective, row.right_text
        ));
    }
    lines.join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Argotario,
    Reddit,
    Climate,
    Logic,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Argotario, Dataset::Reddit, Dataset::Climate, Dataset::Logic];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Argotario => "argotario",
            Dataset::Reddit => "reddit",
            Dataset::Climate => "climate",
            Dataset::Logic => "logic",
        }
    }

    /// Logic has no benign samples, so detection is undefined for it.
    pub fn supports_detection(self) -> bool {
        !matches!(self, Dataset::Logic)
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        Dataset::ALL
            .into_iter()
            .find(|d| d.name() == lower)
            .ok_or_else(|| PromptError::UnknownDataset(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("fallacy detection is not defined for the {0} dataset")]
    DetectionUnsupported(Dataset),
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("failed to read catalog {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed catalog: {0}")]
    Format(#[from] serde_json::Error),
    #[error("dataset {dataset}: order lists `{name}` which is not a member")]
    OrderMismatch { dataset: Dataset, name: String },
    #[error("dataset {dataset}: members and order list differ")]
    Membership { dataset: Dataset },
    #[error("name `{0}` is used by more than one fallacy")]
    DuplicateName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallacyEntry {
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub definition: String,
    pub datasets: Vec<Dataset>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct CatalogFile {
    fallacies: Vec<FallacyEntry>,
    order: BTreeMap<Dataset, Vec<String>>,
}

/// Canonical fallacy names, their definitions and aliases, and the label
/// set of each dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FallacyCatalog {
    entries: BTreeMap<String, FallacyEntry>,
    order: BTreeMap<Dataset, Vec<String>>,
}

impl FallacyCatalog {
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CATALOG).expect("bundled catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let file: CatalogFile = serde_json::from_str(text)?;
        let mut seen = BTreeSet::new();
        for entry in &file.fallacies {
            for name in std::iter::once(&entry.name).chain(&entry.aliases) {
                if !seen.insert(normalize(name)) {
                    return Err(CatalogError::DuplicateName(name.clone()));
                }
            }
        }
        let entries: BTreeMap<String, FallacyEntry> =
            file.fallacies.into_iter().map(|e| (e.name.clone(), e)).collect();
        for (dataset, names) in &file.order {
            for name in names {
                let member = entries.get(name).is_some_and(|e| e.datasets.contains(dataset));
                if !member {
                    return Err(CatalogError::OrderMismatch {
                        dataset: *dataset,
                        name: name.clone(),
                    });
                }
            }
            let members = entries.values().filter(|e| e.datasets.contains(dataset)).count();
            if members != names.len() {
                return Err(CatalogError::Membership { dataset: *dataset });
            }
        }
        Ok(FallacyCatalog {
            entries,
            order: file.order,
        })
    }

    pub fn entry(&self, name: &str) -> Option<&FallacyEntry> {
        self.entries.get(name)
    }

    pub fn entries(&self) -> impl Iterator<Item = &FallacyEntry> {
        self.entries.values()
    }

    pub fn definition(&self, name: &str) -> Option<&str> {
        self.entries.get(name).map(|e| e.definition.as_str())
    }

    /// Canonical names used by `dataset`, in listing order.
    pub fn names(&self, dataset: Dataset) -> &[String] {
        self.order.get(&dataset).map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Default for FallacyCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

pub(crate) fn normalize(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Worked example for the step-by-step prompt variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CotExample {
    pub text: String,
    pub explanation: String,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptOptions {
    /// Insert the textualized tree.
    pub with_tree: bool,
    /// Ask for step-by-step reasoning, imitating this example.
    pub chain_of_thought: Option<CotExample>,
}

impl PromptOptions {
    pub fn with_tree(with_tree: bool) -> Self {
        PromptOptions {
            with_tree,
            chain_of_thought: None,
        }
    }
}

fn table_sentence(table: &TripletTable) -> String {
    format!("The logical relations in the Text are presented in this table: {}. ", render_table(table))
}

fn cot_scaffold(example: &CotExample) -> String {
    format!(
        "Let's think step by step. Firstly, explain the logical relations and logical structure in the text. \
         Secondly, choose the answer. Please mimic the output style in the Example. Example: {}. \
         Output: Firstly, explain the logical relations and logical structure in the text. {}. \
         Secondly, choose the answer. Answer: {}.  ",
        example.text, example.explanation, example.label
    )
}

fn join_with_or(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{}, or {}", init.join(", "), last),
    }
}

pub fn build_detection_prompt(
    text: &str,
    table: &TripletTable,
    catalog: &FallacyCatalog,
    dataset: Dataset,
    with_tree: bool,
) -> Result<String, PromptError> {
    build_detection_prompt_with(text, table, catalog, dataset, &PromptOptions::with_tree(with_tree))
}

pub fn build_detection_prompt_with(
    text: &str,
    table: &TripletTable,
    catalog: &FallacyCatalog,
    dataset: Dataset,
    options: &PromptOptions,
) -> Result<String, PromptError> {
    if !dataset.supports_detection() {
        return Err(PromptError::DetectionUnsupported(dataset));
    }
    let kinds: Vec<String> = catalog
        .names(dataset)
        .iter()
        .map(|name| format!("{} ({})", name, catalog.definition(name).unwrap_or_default()))
        .collect();
    let mut prompt = format!(
        "The task is to detect whether the Text contains logical fallacy or not. The logical fallacy can be {}. ",
        join_with_or(&kinds)
    );
    if options.with_tree {
        prompt.push_str(&table_sentence(table));
    }
    prompt.push_str("Please answer Yes if the Text contains logical fallacy, else answer No. ");
    finish(&mut prompt, text, options);
    Ok(prompt)
}

pub fn build_classification_prompt(
    text: &str,
    table: &TripletTable,
    catalog: &FallacyCatalog,
    dataset: Dataset,
    with_tree: bool,
) -> Result<String, PromptError> {
    build_classification_prompt_with(text, table, catalog, dataset, &PromptOptions::with_tree(with_tree))
}

pub fn build_classification_prompt_with(
    text: &str,
    table: &TripletTable,
    catalog: &FallacyCatalog,
    dataset: Dataset,
    options: &PromptOptions,
) -> Result<String, PromptError> {
    let names = catalog.names(dataset);
    let definitions: Vec<String> = names
        .iter()
        .map(|name| format!("{}: {}.", name, catalog.definition(name).unwrap_or_default()))
        .collect();
    let mut prompt = format!(
        "The task is to classify the fallacy type of the Text. Choose one answer from these fallacy types: {}. \
         The definitions of each fallacy type are as follows. {} ",
        names.join(", "),
        definitions.join(" ")
    );
    if options.with_tree {
        prompt.push_str(&table_sentence(table));
    }
    prompt.push_str("Please classify the fallacy type of the Text. ");
    finish(&mut prompt, text, options);
    Ok(prompt)
}

fn finish(prompt: &mut String, text: &str, options: &PromptOptions) {
    match &options.chain_of_thought {
        Some(example) => {
            prompt.push_str(&cot_scaffold(example));
            prompt.push_str(&format!("Text: {text}. Output:"));
        }
        None => prompt.push_str(&format!("Text: {text}. Answer:")),
    }
}
