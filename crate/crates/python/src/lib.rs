//! Python bindings: trees, taxonomy, prompts, metrics, the tree encoder and
//! answer parsing.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fallacy_tree_core as core;
use fallacy_tree_core::eval_metrics::{DetectionLabel, LabelMap, MetricsReport};
use fallacy_tree_core::textualizer::{self, CotExample, Dataset, FallacyCatalog, PromptOptions};
use fallacy_tree_core::tree_encoder::{self, EncoderParams, VectorTable};
use fallacy_tree_core::{llm_gateway, RelationType};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dataset(name: &str) -> PyResult<Dataset> {
    name.parse().map_err(value_err)
}

fn relation(name: &str) -> PyResult<RelationType> {
    name.parse().map_err(value_err)
}

/// Ten-relation connective table.
#[pyclass(name = "Taxonomy", module = "fallacy_tree")]
struct PyTaxonomy {
    inner: core::Taxonomy,
}

#[pymethods]
impl PyTaxonomy {
    /// The built-in table.
    #[new]
    fn new() -> Self {
        PyTaxonomy {
            inner: core::Taxonomy::builtin(),
        }
    }

    /// Parses `relation: phrase | phrase` lines.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyTaxonomy {
            inner: core::Taxonomy::parse(text).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyTaxonomy {
            inner: core::load_taxonomy(Some(&path)).map_err(|e| PyIOError::new_err(e.to_string()))?,
        })
    }

    #[staticmethod]
    fn relations() -> Vec<&'static str> {
        RelationType::ALL.iter().map(|r| r.name()).collect()
    }

    fn phrases(&self, relation_name: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.phrases(relation(relation_name)?).map(String::from).collect())
    }

    fn relation_of(&self, phrase: &str) -> Option<&'static str> {
        self.inner.relation_of(phrase).map(RelationType::name)
    }

    /// `(relation, phrase, length)` of the longest phrase at `start`.
    #[pyo3(signature = (tokens, start=0))]
    fn longest_match(&self, tokens: Vec<String>, start: usize) -> Option<(&'static str, String, usize)> {
        self.inner
            .longest_match(&tokens, start)
            .map(|m| (m.relation.name(), m.phrase, m.len))
    }

    fn digest(&self) -> String {
        self.inner.digest()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Logical structure tree of one statement.
#[pyclass(name = "LogicTree", module = "fallacy_tree")]
struct PyLogicTree {
    inner: core::LogicTree,
}

#[pymethods]
impl PyLogicTree {
    #[getter]
    fn tokens(&self) -> Vec<String> {
        self.inner.tokens.clone()
    }

    /// `(relation, connective)` of every internal node, root first.
    fn relations(&self) -> Vec<(&'static str, String)> {
        self.inner
            .relations()
            .into_iter()
            .map(|(r, c)| (r.name(), c.to_string()))
            .collect()
    }

    fn depth(&self) -> usize {
        self.inner.depth()
    }

    /// `(left, relation, connective, right)` rows, deepest first.
    fn triplets(&self) -> Vec<(String, &'static str, String, String)> {
        textualizer::to_triplets(&self.inner)
            .rows
            .into_iter()
            .map(|t| (t.left_text, t.relation.name(), t.connective, t.right_text))
            .collect()
    }

    fn table(&self) -> String {
        core::render_table(&textualizer::to_triplets(&self.inner))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyLogicTree {
            inner: serde_json::from_str(text).map_err(value_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("LogicTree({} tokens, {} relations)", self.inner.tokens.len(), self.inner.relations().len())
    }
}

/// Round-trips a bracketed tree through the parser.
#[pyfunction]
fn parse_tree(text: &str) -> PyResult<String> {
    Ok(core::parse_bracketed(text).map_err(value_err)?.to_bracketed())
}

/// Leaf tokens of a bracketed tree.
#[pyfunction]
fn tree_tokens(text: &str) -> PyResult<Vec<String>> {
    Ok(core::parse_bracketed(text).map_err(value_err)?.tokens().to_vec())
}

/// Builds the logic tree of a statement from one bracketed tree per sentence.
#[pyfunction]
#[pyo3(signature = (sentences, taxonomy=None))]
fn build_logic_tree(sentences: Vec<String>, taxonomy: Option<PyRef<'_, PyTaxonomy>>) -> PyResult<PyLogicTree> {
    let trees = sentences
        .iter()
        .map(|s| core::parse_bracketed(s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    let builtin;
    let tax = match &taxonomy {
        Some(t) => &t.inner,
        None => {
            builtin = core::Taxonomy::builtin();
            &builtin
        }
    };
    Ok(PyLogicTree {
        inner: core::build_logic_tree(&trees, tax),
    })
}

fn prompt_options(with_tree: bool, cot: Option<(String, String, String)>) -> PromptOptions {
    PromptOptions {
        with_tree,
        chain_of_thought: cot.map(|(text, explanation, label)| CotExample { text, explanation, label }),
    }
}

fn table_of(tree: Option<&PyLogicTree>) -> textualizer::TripletTable {
    tree.map(|t| textualizer::to_triplets(&t.inner)).unwrap_or_default()
}

/// Zero-shot detection prompt. `cot` is a `(text, explanation, label)`
/// worked example.
#[pyfunction]
#[pyo3(signature = (text, dataset_name, tree=None, cot=None))]
fn detection_prompt(
    text: &str,
    dataset_name: &str,
    tree: Option<PyRef<'_, PyLogicTree>>,
    cot: Option<(String, String, String)>,
) -> PyResult<String> {
    textualizer::build_detection_prompt_with(
        text,
        &table_of(tree.as_deref()),
        &FallacyCatalog::builtin(),
        dataset(dataset_name)?,
        &prompt_options(tree.is_some(), cot),
    )
    .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (text, dataset_name, tree=None, cot=None))]
fn classification_prompt(
    text: &str,
    dataset_name: &str,
    tree: Option<PyRef<'_, PyLogicTree>>,
    cot: Option<(String, String, String)>,
) -> PyResult<String> {
    textualizer::build_classification_prompt_with(
        text,
        &table_of(tree.as_deref()),
        &FallacyCatalog::builtin(),
        dataset(dataset_name)?,
        &prompt_options(tree.is_some(), cot),
    )
    .map_err(value_err)
}

/// Fallacy type names offered for a dataset.
#[pyfunction]
fn fallacy_types(dataset_name: &str) -> PyResult<Vec<String>> {
    Ok(FallacyCatalog::builtin().names(dataset(dataset_name)?).to_vec())
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("precision", r.precision)?;
    d.set_item("recall", r.recall)?;
    d.set_item("f1", r.f1)?;
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("total", r.total)?;
    let per = PyDict::new(py);
    for (name, s) in &r.per_class {
        let c = PyDict::new(py);
        c.set_item("precision", s.precision)?;
        c.set_item("recall", s.recall)?;
        c.set_item("f1", s.f1)?;
        c.set_item("support", s.support)?;
        c.set_item("predicted", s.predicted)?;
        per.set_item(name, c)?;
    }
    d.set_item("per_class", per)?;
    d.set_item("diagnostics", r.diagnostics.clone())?;
    Ok(d)
}

/// Fallacy-class precision, recall, F1 and accuracy, in percent. Labels
/// are "fallacy"/"yes" or "no_fallacy"/"no".
#[pyfunction]
fn detection_metrics<'py>(py: Python<'py>, preds: Vec<String>, golds: Vec<String>) -> PyResult<Bound<'py, PyDict>> {
    let conv = |v: &[String]| -> Vec<DetectionLabel> {
        v.iter()
            .map(|s| match s.trim().to_lowercase().as_str() {
                "yes" => DetectionLabel::Fallacy,
                "no" => DetectionLabel::NoFallacy,
                other => DetectionLabel::from_label(other),
            })
            .collect()
    };
    let r = core::detection_metrics(&conv(&preds), &conv(&golds)).map_err(value_err)?;
    report_dict(py, &r)
}

/// Macro precision, recall and F1 over gold classes, plus accuracy.
#[pyfunction]
fn classification_metrics<'py>(
    py: Python<'py>,
    preds: Vec<String>,
    golds: Vec<String>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = core::classification_metrics(&preds, &golds, &LabelMap::builtin()).map_err(value_err)?;
    report_dict(py, &r)
}

#[pyfunction]
fn unify_label(name: &str) -> String {
    core::unify_label(name, &LabelMap::builtin())
}

/// `(label, diagnostic)`; label is "fallacy" or "no_fallacy", the latter
/// also as the fallback when the diagnostic is set.
#[pyfunction]
fn parse_detection(answer: &str) -> (&'static str, Option<String>) {
    let p = llm_gateway::parse_detection(answer);
    (p.label.name(), p.diagnostic)
}

#[pyfunction]
fn parse_classification(answer: &str) -> (String, Option<String>) {
    let p = llm_gateway::parse_classification(answer, &FallacyCatalog::builtin(), &LabelMap::builtin());
    (p.label, p.diagnostic)
}

/// Relation-aware tree encoder with its token vectors.
#[pyclass(name = "Encoder", module = "fallacy_tree")]
struct PyEncoder {
    params: EncoderParams,
    table: VectorTable,
}

#[pymethods]
impl PyEncoder {
    /// Loads word vectors and either loads `params` or initializes fresh
    /// parameters from `seed`.
    #[new]
    #[pyo3(signature = (vectors, params=None, seed=0, d_prime=None))]
    fn new(vectors: PathBuf, params: Option<PathBuf>, seed: u64, d_prime: Option<usize>) -> PyResult<Self> {
        let table = tree_encoder::load_vectors(&vectors).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let params = match params {
            Some(p) => EncoderParams::load(&p).map_err(value_err)?,
            None => {
                let d = table.dim();
                tree_encoder::init_params(seed, d, d_prime.unwrap_or(d)).map_err(value_err)?
            }
        };
        if params.d != table.dim() {
            return Err(PyValueError::new_err(format!(
                "parameters expect dimension {}, vectors have {}",
                params.d,
                table.dim()
            )));
        }
        Ok(PyEncoder { params, table })
    }

    #[getter]
    fn d(&self) -> usize {
        self.params.d
    }

    #[getter]
    fn d_prime(&self) -> usize {
        self.params.d_prime
    }

    fn encode(&self, tree: &PyLogicTree) -> PyResult<Vec<f64>> {
        let v = tree_encoder::encode_tree(&tree.inner, &self.params, &self.table).map_err(value_err)?;
        Ok(v.iter().copied().collect())
    }

    fn soft_prompt(&self, tree: &PyLogicTree) -> PyResult<Vec<f64>> {
        let v = tree_encoder::soft_prompt(&tree.inner, &self.params, &self.table).map_err(value_err)?;
        Ok(v.iter().copied().collect())
    }

    /// Largest relative error between analytic and central-difference
    /// gradients over `probes` parameter entries.
    #[pyo3(signature = (tree, epsilon=1e-3, probes=32, seed=0))]
    fn grad_check(&self, tree: &PyLogicTree, epsilon: f64, probes: usize, seed: u64) -> PyResult<f64> {
        let r = tree_encoder::grad_check(&tree.inner, &self.params, &self.table, epsilon, probes, seed)
            .map_err(value_err)?;
        Ok(r.max_relative_error)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.params.save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

#[pymodule]
fn fallacy_tree(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTaxonomy>()?;
    m.add_class::<PyLogicTree>()?;
    m.add_class::<PyEncoder>()?;
    m.add_function(wrap_pyfunction!(parse_tree, m)?)?;
    m.add_function(wrap_pyfunction!(tree_tokens, m)?)?;
    m.add_function(wrap_pyfunction!(build_logic_tree, m)?)?;
    m.add_function(wrap_pyfunction!(detection_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(classification_prompt, m)?)?;
    m.add_function(wrap_pyfunction!(fallacy_types, m)?)?;
    m.add_function(wrap_pyfunction!(detection_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(classification_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(unify_label, m)?)?;
    m.add_function(wrap_pyfunction!(parse_detection, m)?)?;
    m.add_function(wrap_pyfunction!(parse_classification, m)?)?;
    Ok(())
}
