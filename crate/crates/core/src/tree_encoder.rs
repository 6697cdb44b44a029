//! Relation-aware recursive tree embedding and the projection into a target
//! embedding space.
//!
//! Every relation `r` owns a linear map `W^r` (d × 3d) and bias `b^r`. A leaf
//! is the mean of its token vectors; an internal node is
//! `W^r [left ; connective ; right] + b^r`, where the connective embedding is
//! the mean of the connective's own token vectors. The root embedding is then
//! projected as `W2 (W1 e + b1) + b2`. There are no nonlinearities.
//!
//! # Parameter file
//!
//! Parameters are stored as JSON:
//!
//! ```text
//! {
//!   "format": "fallacy-tree-encoder",
//!   "version": 1,
//!   "d": <usize>, "d_prime": <usize>,
//!   "relations": { "<relation name>": { "weight": [[f64; 3d]; d], "bias": [f64; d] }, ... ten entries },
//!   "projection": { "w1": [[f64; d]; d'], "b1": [f64; d'], "w2": [[f64; d']; d'], "b2": [f64; d'] }
//! }
//! ```
//!
//! Matrices are row-major lists of rows. Floats are written in shortest
//! round-trip form, so save followed by load is exact.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic_tree::{LogicNode, LogicTree};
use crate::taxonomy::RelationType;

/// Width of the default token vectors.
pub const DEFAULT_DIM: usize = 768;

pub const PARAMS_FORMAT: &str = "fallacy-tree-encoder";

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("vector file is empty")]
    EmptyVectors,
    #[error("line {line}: expected {expected} components, found {found}")]
    InconsistentDim { line: usize, expected: usize, found: usize },
    #[error("line {line}: bad number `{value}`")]
    BadNumber { line: usize, value: String },
    #[error("cannot embed an empty token sequence")]
    EmptyTokens,
    #[error("dimensions must be positive (d={d}, d'={d_prime})")]
    BadDimensions { d: usize, d_prime: usize },
    #[error("dimension mismatch: {what} is {found}, expected {expected}")]
    Mismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("parameter file: {0}")]
    Format(String),
    #[error("parameter file: {0}")]
    Json(#[from] serde_json::Error),
}

fn mismatch(what: impl Into<String>, expected: usize, found: usize) -> EncoderError {
    EncoderError::Mismatch {
        what: what.into(),
        expected,
        found,
    }
}

/// Token → vector lookup; keys are lowercased.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorTable {
    dim: usize,
    vectors: HashMap<String, DVector<f64>>,
}

impl VectorTable {
    pub fn new(dim: usize) -> Self {
        VectorTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, token: &str, vector: DVector<f64>) -> Result<(), EncoderError> {
        if vector.len() != self.dim {
            return Err(mismatch(format!("vector for `{token}`"), self.dim, vector.len()));
        }
        self.vectors.insert(token.to_lowercase(), vector);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&DVector<f64>> {
        self.vectors.get(&token.to_lowercase())
    }

    /// Word-vector text format: `token c1 c2 ...` per line. A leading
    /// `<count> <dim>` header line is skipped.
    pub fn parse(text: &str) -> Result<Self, EncoderError> {
        let mut table: Option<VectorTable> = None;
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| EncoderError::BadNumber {
                        line: i + 1,
                        value: v.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            let t = table.get_or_insert_with(|| VectorTable::new(values.len()));
            if values.len() != t.dim || values.is_empty() {
                return Err(EncoderError::InconsistentDim {
                    line: i + 1,
                    expected: t.dim,
                    found: values.len(),
                });
            }
            let key = fields[0].to_lowercase();
            if t.vectors.contains_key(&key) {
                log::warn!("duplicate vector for `{}` on line {}; keeping the first", fields[0], i + 1);
                continue;
            }
            t.vectors.insert(key, DVector::from_vec(values));
        }
        table.ok_or(EncoderError::EmptyVectors)
    }
}

pub fn load_vectors(path: &Path) -> Result<VectorTable, EncoderError> {
    let text = fs::read_to_string(path).map_err(|source| EncoderError::Io {
        path: path.display().to_string(),
        source,
    })?;
    VectorTable::parse(&text)
}

/// Mean of the token vectors; unknown tokens count as zero vectors.
pub fn leaf_embedding<S: AsRef<str>>(tokens: &[S], table: &VectorTable) -> Result<DVector<f64>, EncoderError> {
    if tokens.is_empty() {
        return Err(EncoderError::EmptyTokens);
    }
    let mut sum = DVector::zeros(table.dim);
    let mut found = 0;
    for tok in tokens {
        if let Some(v) = table.get(tok.as_ref()) {
            sum += v;
            found += 1;
        }
    }
    if found == 0 {
        let text: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
        log::warn!("no vectors for any of [{}]; using the zero vector", text.join(" "));
    }
    Ok(sum / tokens.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationLayer {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub d: usize,
    pub d_prime: usize,
    /// Indexed by [`RelationType::index`].
    pub relations: Vec<RelationLayer>,
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl EncoderParams {
    pub fn zeros(d: usize, d_prime: usize) -> Self {
        EncoderParams {
            d,
            d_prime,
            relations: RelationType::ALL
                .iter()
                .map(|_| RelationLayer {
                    weight: DMatrix::zeros(d, 3 * d),
                    bias: DVector::zeros(d),
                })
                .collect(),
            w1: DMatrix::zeros(d_prime, d),
            b1: DVector::zeros(d_prime),
            w2: DMatrix::zeros(d_prime, d_prime),
            b2: DVector::zeros(d_prime),
        }
    }

    pub fn layer(&self, relation: RelationType) -> &RelationLayer {
        &self.relations[relation.index()]
    }

    pub fn layer_mut(&mut self, relation: RelationType) -> &mut RelationLayer {
        &mut self.relations[relation.index()]
    }

    /// Checks every shape against `d` and `d_prime`.
    pub fn validate(&self) -> Result<(), EncoderError> {
        let (d, dp) = (self.d, self.d_prime);
        if d == 0 || dp == 0 {
            return Err(EncoderError::BadDimensions { d, d_prime: dp });
        }
        if self.relations.len() != RelationType::ALL.len() {
            return Err(mismatch("relation layers", RelationType::ALL.len(), self.relations.len()));
        }
        for (rel, layer) in RelationType::ALL.iter().zip(&self.relations) {
            check_shape(&format!("W^{rel}"), &layer.weight, d, 3 * d)?;
            check_len(&format!("b^{rel}"), &layer.bias, d)?;
        }
        check_shape("W1", &self.w1, dp, d)?;
        check_len("b1", &self.b1, dp)?;
        check_shape("W2", &self.w2, dp, dp)?;
        check_len("b2", &self.b2, dp)
    }

    pub fn to_json(&self) -> Result<String, EncoderError> {
        let file = ParamsFile {
            format: PARAMS_FORMAT.to_string(),
            version: 1,
            d: self.d,
            d_prime: self.d_prime,
            relations: RelationType::ALL
                .iter()
                .map(|r| {
                    let layer = self.layer(*r);
                    (
                        r.name().to_string(),
                        LayerFile {
                            weight: rows(&layer.weight),
                            bias: layer.bias.iter().copied().collect(),
                        },
                    )
                })
                .collect(),
            projection: ProjectionFile {
                w1: rows(&self.w1),
                b1: self.b1.iter().copied().collect(),
                w2: rows(&self.w2),
                b2: self.b2.iter().copied().collect(),
            },
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, EncoderError> {
        let file: ParamsFile = serde_json::from_str(text)?;
        if file.format != PARAMS_FORMAT || file.version != 1 {
            return Err(EncoderError::Format(format!(
                "unsupported format {} v{}",
                file.format, file.version
            )));
        }
        let mut params = EncoderParams::zeros(file.d, file.d_prime);
        for (name, layer) in &file.relations {
            let rel: RelationType = name
                .parse()
                .map_err(|e: crate::taxonomy::UnknownRelation| EncoderError::Format(e.to_string()))?;
            *params.layer_mut(rel) = RelationLayer {
                weight: matrix(&format!("W^{rel}"), &layer.weight, file.d, 3 * file.d)?,
                bias: vector(&format!("b^{rel}"), &layer.bias, file.d)?,
            };
        }
        if file.relations.len() != RelationType::ALL.len() {
            return Err(mismatch("relation layers", RelationType::ALL.len(), file.relations.len()));
        }
        let p = &file.projection;
        params.w1 = matrix("W1", &p.w1, file.d_prime, file.d)?;
        params.b1 = vector("b1", &p.b1, file.d_prime)?;
        params.w2 = matrix("W2", &p.w2, file.d_prime, file.d_prime)?;
        params.b2 = vector("b2", &p.b2, file.d_prime)?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        fs::write(path, self.to_json()?).map_err(|source| EncoderError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let text = fs::read_to_string(path).map_err(|source| EncoderError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn check_shape(what: &str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<(), EncoderError> {
    if m.nrows() != rows {
        return Err(mismatch(format!("{what} rows"), rows, m.nrows()));
    }
    if m.ncols() != cols {
        return Err(mismatch(format!("{what} columns"), cols, m.ncols()));
    }
    Ok(())
}

fn check_len(what: &str, v: &DVector<f64>, len: usize) -> Result<(), EncoderError> {
    if v.len() != len {
        return Err(mismatch(what, len, v.len()));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    format: String,
    version: u32,
    d: usize,
    d_prime: usize,
    relations: BTreeMap<String, LayerFile>,
    projection: ProjectionFile,
}

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weight: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProjectionFile {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(what: &str, data: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>, EncoderError> {
    if data.len() != nrows {
        return Err(mismatch(format!("{what} rows"), nrows, data.len()));
    }
    if let Some(bad) = data.iter().find(|r| r.len() != ncols) {
        return Err(mismatch(format!("{what} columns"), ncols, bad.len()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| data[i][j]))
}

fn vector(what: &str, data: &[f64], len: usize) -> Result<DVector<f64>, EncoderError> {
    if data.len() != len {
        return Err(mismatch(what, len, data.len()));
    }
    Ok(DVector::from_column_slice(data))
}

/// Uniform `[-s, s]` weights with `s = 1/sqrt(fan_in)` and zero biases,
/// deterministic in `seed`.
pub fn init_params(seed: u64, d: usize, d_prime: usize) -> Result<EncoderParams, EncoderError> {
    if d == 0 || d_prime == 0 {
        return Err(EncoderError::BadDimensions { d, d_prime });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |rows: usize, cols: usize| {
        let s = 1.0 / (cols as f64).sqrt();
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-s..=s))
    };
    let mut params = EncoderParams::zeros(d, d_prime);
    for layer in &mut params.relations {
        layer.weight = uniform(d, 3 * d);
    }
    params.w1 = uniform(d_prime, d);
    params.w2 = uniform(d_prime, d_prime);
    Ok(params)
}

fn connective_tokens(connective: &str) -> Vec<&str> {
    connective.split_whitespace().collect()
}

fn leaf_vector(tokens: &[String], region: &crate::span::Region, table: &VectorTable) -> Result<DVector<f64>, EncoderError> {
    let words: Vec<&str> = region.tokens(tokens).collect();
    if words.is_empty() {
        return Ok(DVector::zeros(table.dim));
    }
    leaf_embedding(&words, table)
}

fn check_dims(params: &EncoderParams, table: &VectorTable) -> Result<(), EncoderError> {
    params.validate()?;
    if table.dim != params.d {
        return Err(mismatch("vector table dimension", params.d, table.dim));
    }
    Ok(())
}

/// Bottom-up embedding of the whole tree. A leaf with no tokens embeds as
/// the zero vector.
pub fn encode_tree(tree: &LogicTree, params: &EncoderParams, table: &VectorTable) -> Result<DVector<f64>, EncoderError> {
    check_dims(params, table)?;
    Ok(forward(&tree.root, &tree.tokens, params, table)?.0)
}

/// `W2 (W1 v + b1) + b2`.
pub fn project(v: &DVector<f64>, params: &EncoderParams) -> Result<DVector<f64>, EncoderError> {
    params.validate()?;
    check_len("input vector", v, params.d)?;
    Ok(&params.w2 * (&params.w1 * v + &params.b1) + &params.b2)
}

/// Root embedding followed by projection.
pub fn soft_prompt(tree: &LogicTree, params: &EncoderParams, table: &VectorTable) -> Result<DVector<f64>, EncoderError> {
    project(&encode_tree(tree, params, table)?, params)
}

enum Tape {
    Leaf,
    Internal {
        relation: RelationType,
        input: DVector<f64>,
        left: Box<Tape>,
        right: Box<Tape>,
    },
}

fn forward(
    node: &LogicNode,
    tokens: &[String],
    params: &EncoderParams,
    table: &VectorTable,
) -> Result<(DVector<f64>, Tape), EncoderError> {
    match node {
        LogicNode::Leaf { span, .. } => Ok((leaf_vector(tokens, span, table)?, Tape::Leaf)),
        LogicNode::Internal {
            relation,
            connective,
            left,
            right,
            ..
        } => {
            let (l, lt) = forward(left, tokens, params, table)?;
            let c = leaf_embedding(&connective_tokens(connective), table)?;
            let (r, rt) = forward(right, tokens, params, table)?;
            let d = params.d;
            let mut input = DVector::zeros(3 * d);
            input.rows_mut(0, d).copy_from(&l);
            input.rows_mut(d, d).copy_from(&c);
            input.rows_mut(2 * d, d).copy_from(&r);
            let layer = params.layer(*relation);
            let out = &layer.weight * &input + &layer.bias;
            Ok((
                out,
                Tape::Internal {
                    relation: *relation,
                    input,
                    left: Box::new(lt),
                    right: Box::new(rt),
                },
            ))
        }
    }
}

fn backward(tape: &Tape, grad: &DVector<f64>, params: &EncoderParams, acc: &mut EncoderParams) {
    if let Tape::Internal {
        relation,
        input,
        left,
        right,
    } = tape
    {
        let layer = acc.layer_mut(*relation);
        layer.weight += grad * input.transpose();
        layer.bias += grad;
        let d = params.d;
        let g_in = params.layer(*relation).weight.tr_mul(grad);
        backward(left, &g_in.rows(0, d).into_owned(), params, acc);
        backward(right, &g_in.rows(2 * d, d).into_owned(), params, acc);
    }
}

/// Sum of the projected soft prompt; the scalar used for gradient checks.
pub fn scalar_loss(tree: &LogicTree, params: &EncoderParams, table: &VectorTable) -> Result<f64, EncoderError> {
    Ok(soft_prompt(tree, params, table)?.sum())
}

/// Analytic gradient of [`scalar_loss`] with respect to every parameter.
pub fn loss_gradient(tree: &LogicTree, params: &EncoderParams, table: &VectorTable) -> Result<EncoderParams, EncoderError> {
    check_dims(params, table)?;
    let (root, tape) = forward(&tree.root, &tree.tokens, params, table)?;
    let mut grads = EncoderParams::zeros(params.d, params.d_prime);
    let ones = DVector::from_element(params.d_prime, 1.0);
    let hidden = &params.w1 * &root + &params.b1;
    grads.b2 = ones.clone();
    grads.w2 = &ones * hidden.transpose();
    let g_hidden = params.w2.tr_mul(&ones);
    grads.w1 = &g_hidden * root.transpose();
    grads.b1 = g_hidden.clone();
    let g_root = params.w1.tr_mul(&g_hidden);
    backward(&tape, &g_root, params, &mut grads);
    Ok(grads)
}

/// Addresses a single scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRef {
    RelationWeight { relation: RelationType, row: usize, col: usize },
    RelationBias { relation: RelationType, row: usize },
    W1 { row: usize, col: usize },
    B1 { row: usize },
    W2 { row: usize, col: usize },
    B2 { row: usize },
}

impl ParamRef {
    fn slot<'a>(&self, p: &'a mut EncoderParams) -> &'a mut f64 {
        match *self {
            ParamRef::RelationWeight { relation, row, col } => &mut p.layer_mut(relation).weight[(row, col)],
            ParamRef::RelationBias { relation, row } => &mut p.layer_mut(relation).bias[row],
            ParamRef::W1 { row, col } => &mut p.w1[(row, col)],
            ParamRef::B1 { row } => &mut p.b1[row],
            ParamRef::W2 { row, col } => &mut p.w2[(row, col)],
            ParamRef::B2 { row } => &mut p.b2[row],
        }
    }

    pub fn get(&self, p: &EncoderParams) -> f64 {
        match *self {
            ParamRef::RelationWeight { relation, row, col } => p.layer(relation).weight[(row, col)],
            ParamRef::RelationBias { relation, row } => p.layer(relation).bias[row],
            ParamRef::W1 { row, col } => p.w1[(row, col)],
            ParamRef::B1 { row } => p.b1[row],
            ParamRef::W2 { row, col } => p.w2[(row, col)],
            ParamRef::B2 { row } => p.b2[row],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradProbe {
    pub param: ParamRef,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradReport {
    pub epsilon: f64,
    pub probes: Vec<GradProbe>,
    pub max_relative_error: f64,
}

/// Denominator floor for relative errors, so that entries whose true
/// gradient is ~0 are judged on absolute error.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
}

/// Compares analytic gradients of the summed soft prompt against central
/// differences on `probe_count` parameter entries, sampled from the layers
/// the tree actually uses.
pub fn grad_check(
    tree: &LogicTree,
    params: &EncoderParams,
    table: &VectorTable,
    epsilon: f64,
    probe_count: usize,
    seed: u64,
) -> Result<GradReport, EncoderError> {
    let analytic = loss_gradient(tree, params, table)?;
    let candidates = active_params(tree, params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(probe_count);
    let mut work = params.clone();
    for _ in 0..probe_count {
        let param = candidates[rng.random_range(0..candidates.len())];
        let original = param.get(params);
        *param.slot(&mut work) = original + epsilon;
        let plus = scalar_loss(tree, &work, table)?;
        *param.slot(&mut work) = original - epsilon;
        let minus = scalar_loss(tree, &work, table)?;
        *param.slot(&mut work) = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = param.get(&analytic);
        probes.push(GradProbe {
            param,
            analytic: a,
            numeric,
            relative_error: relative_error(a, numeric),
        });
    }
    let max_relative_error = probes.iter().map(|p| p.relative_error).fold(0.0, f64::max);
    Ok(GradReport {
        epsilon,
        probes,
        max_relative_error,
    })
}

fn active_params(tree: &LogicTree, params: &EncoderParams) -> Vec<ParamRef> {
    let (d, dp) = (params.d, params.d_prime);
    let mut used: Vec<RelationType> = tree.relations().into_iter().map(|(r, _)| r).collect();
    used.sort();
    used.dedup();
    let mut out = Vec::new();
    for relation in used {
        for row in 0..d {
            out.push(ParamRef::RelationBias { relation, row });
            for col in 0..3 * d {
                out.push(ParamRef::RelationWeight { relation, row, col });
            }
        }
    }
    for row in 0..dp {
        out.push(ParamRef::B1 { row });
        out.push(ParamRef::B2 { row });
        for col in 0..d {
            out.push(ParamRef::W1 { row, col });
        }
        for col in 0..dp {
            out.push(ParamRef::W2 { row, col });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::{Region, Span};

    fn table2() -> VectorTable {
        VectorTable::parse("cat 1.0 0.0\ndog 0.0 1.0\n").unwrap()
    }

    fn leaf(tokens: &mut Vec<String>, words: &str) -> LogicNode {
        let start = tokens.len();
        tokens.extend(words.split(' ').map(String::from));
        LogicNode::Leaf {
            span: Region::from_span(Span::new(start, tokens.len())),
            text: words.to_string(),
        }
    }

    #[test]
    fn loads_vectors() {
        let t = table2();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("CAT").unwrap().as_slice(), &[1.0, 0.0]);
        assert!(matches!(
            VectorTable::parse("cat 1 0\ndog 1 0 0\n"),
            Err(EncoderError::InconsistentDim { line: 2, .. })
        ));
        assert!(matches!(VectorTable::parse("\n\n"), Err(EncoderError::EmptyVectors)));
        let with_header = VectorTable::parse("2 3\na 1 2 3\nb 4 5 6\n").unwrap();
        assert_eq!(with_header.dim(), 3);
        assert_eq!(with_header.len(), 2);
    }

    #[test]
    fn leaf_means() {
        let t = table2();
        assert_eq!(leaf_embedding(&["cat", "dog"], &t).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(leaf_embedding(&["cat"], &t).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(leaf_embedding(&["cat", "zzz"], &t).unwrap().as_slice(), &[0.5, 0.0]);
        assert_eq!(leaf_embedding(&["zzz"], &t).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(matches!(leaf_embedding::<&str>(&[], &t), Err(EncoderError::EmptyTokens)));
    }

    #[test]
    fn init_is_deterministic_and_shaped() {
        let a = init_params(7, 2, 3).unwrap();
        assert_eq!(a, init_params(7, 2, 3).unwrap());
        assert_ne!(a, init_params(8, 2, 3).unwrap());
        assert_eq!(a.w1.shape(), (3, 2));
        assert_eq!(a.w2.shape(), (3, 3));
        assert_eq!(a.layer(RelationType::Causal).weight.shape(), (2, 6));
        assert!(a.b1.iter().all(|&b| b == 0.0));
        let s = 1.0 / 6f64.sqrt();
        assert!(a.relations.iter().all(|l| l.weight.iter().all(|w| w.abs() <= s)));
        assert!(matches!(init_params(1, 0, 3), Err(EncoderError::BadDimensions { .. })));
    }

    #[test]
    fn causal_hand_product() {
        let mut tokens = Vec::new();
        let l = leaf(&mut tokens, "l");
        let r = leaf(&mut tokens, "r");
        let tree = LogicTree {
            tokens,
            root: LogicNode::Internal {
                relation: RelationType::Causal,
                connective: "c".into(),
                connective_span: Span::new(5, 6),
                span: Region::from_span(Span::new(0, 2)),
                left: Box::new(l),
                right: Box::new(r),
            },
            rejected: vec![],
        };
        let table = VectorTable::parse("l 1 2\nc 3 4\nr 5 6\n").unwrap();
        let mut params = EncoderParams::zeros(2, 2);
        params.layer_mut(RelationType::Causal).weight =
            DMatrix::from_row_slice(2, 6, &[1., 0., 0., 0., 0., 0., 0., 0., 0., 0., 0., 1.]);
        let out = encode_tree(&tree, &params, &table).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 6.0]);
    }

    #[test]
    fn projection_cases() {
        let mut p = EncoderParams::zeros(2, 2);
        p.w1 = DMatrix::identity(2, 2);
        p.w2 = DMatrix::identity(2, 2);
        let v = DVector::from_vec(vec![0.3, -1.5]);
        assert_eq!(project(&v, &p).unwrap(), v);
        assert_eq!(project(&DVector::zeros(2), &p).unwrap(), DVector::zeros(2));
        p.w1 = DMatrix::from_row_slice(2, 2, &[1., 0., 0., 2.]);
        p.b1 = DVector::from_vec(vec![1., 1.]);
        p.b2 = DVector::from_vec(vec![0., -1.]);
        let out = project(&DVector::from_vec(vec![1., 1.]), &p).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 2.0]);
        assert!(matches!(project(&DVector::zeros(3), &p), Err(EncoderError::Mismatch { .. })));
    }

    #[test]
    fn leaf_only_tree_is_leaf_embedding() {
        let mut tokens = Vec::new();
        let root = leaf(&mut tokens, "cat dog");
        let tree = LogicTree { tokens, root, rejected: vec![] };
        let p = init_params(1, 2, 2).unwrap();
        assert_eq!(encode_tree(&tree, &p, &table2()).unwrap().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn params_json_round_trip() {
        let p = init_params(42, 3, 4).unwrap();
        let back = EncoderParams::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, back);
        let bad = p.to_json().unwrap().replace("\"d\": 3", "\"d\": 2");
        assert!(EncoderParams::from_json(&bad).is_err());
    }

    #[test]
    fn probe_count_zero_is_empty() {
        let mut tokens = Vec::new();
        let root = leaf(&mut tokens, "cat");
        let tree = LogicTree { tokens, root, rejected: vec![] };
        let p = init_params(3, 2, 2).unwrap();
        let report = grad_check(&tree, &p, &table2(), 1e-3, 0, 0).unwrap();
        assert!(report.probes.is_empty());
        assert_eq!(report.max_relative_error, 0.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut tokens = Vec::new();
        let root = leaf(&mut tokens, "cat");
        let tree = LogicTree { tokens, root, rejected: vec![] };
        let p = init_params(3, 3, 2).unwrap();
        assert!(matches!(encode_tree(&tree, &p, &table2()), Err(EncoderError::Mismatch { .. })));
    }
}
