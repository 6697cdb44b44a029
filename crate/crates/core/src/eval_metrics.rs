//! Detection and classification scores, and fallacy label unification.
//!
//! All values are percentages. Per class:
//! `P = 100·tp/(tp+fp)`, `R = 100·tp/(tp+fn)`, `F1 = 2·P·R/(P+R)`, with any
//! 0/0 taken as 0. Macro averages are unweighted means over the classes that
//! occur in the gold labels, summed in name order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textualizer::{normalize, FallacyCatalog};

pub const NO_FALLACY: &str = "No Fallacy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionLabel {
    Fallacy,
    NoFallacy,
}

impl DetectionLabel {
    pub fn name(self) -> &'static str {
        match self {
            DetectionLabel::Fallacy => "fallacy",
            DetectionLabel::NoFallacy => "no_fallacy",
        }
    }

    /// Binary view of a fallacy-type label.
    pub fn from_label(label: &str) -> Self {
        if normalize(label) == normalize(NO_FALLACY) || normalize(label) == "no_fallacy" {
            DetectionLabel::NoFallacy
        } else {
            DetectionLabel::Fallacy
        }
    }
}

impl fmt::Display for DetectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Alias → canonical fallacy name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    map: HashMap<String, String>,
}

impl LabelMap {
    pub fn from_catalog(catalog: &FallacyCatalog) -> Self {
        let mut map = HashMap::new();
        for entry in catalog.entries() {
            map.insert(normalize(&entry.name), entry.name.clone());
            for alias in &entry.aliases {
                map.insert(normalize(alias), entry.name.clone());
            }
        }
        map.insert(normalize(NO_FALLACY), NO_FALLACY.to_string());
        LabelMap { map }
    }

    pub fn builtin() -> Self {
        Self::from_catalog(&FallacyCatalog::builtin())
    }

    /// Canonical name, if `name` is known under any spelling.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        self.map.get(&normalize(name)).map(String::as_str)
    }

    /// Every known spelling (normalized) with its canonical name.
    pub fn aliases(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl Default for LabelMap {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Canonical name for `name`; unknown names come back unchanged.
pub fn unify_label(name: &str, map: &LabelMap) -> String {
    match map.resolve(name) {
        Some(canonical) => canonical.to_string(),
        None => {
            log::warn!("unknown fallacy label `{name}` left as is");
            name.to_string()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("{preds} predictions but {golds} gold labels")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("no labels to score")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold occurrences.
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsKind {
    Detection,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub kind: MetricsKind,
    /// Fallacy-class scores for detection, macro averages for classification.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub total: usize,
    pub per_class: BTreeMap<String, ClassScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl MetricsReport {
    /// Plain-text rendering for terminals and report files.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let headline = match self.kind {
            MetricsKind::Detection => "fallacy class",
            MetricsKind::Classification => "macro",
        };
        out.push_str(&format!(
            "{headline}: precision {:.2}  recall {:.2}  f1 {:.2}  accuracy {:.2}  (n={})\n",
            self.precision, self.recall, self.f1, self.accuracy, self.total
        ));
        out.push_str(&format!(
            "{:<28} {:>9} {:>9} {:>9} {:>8}\n",
            "class", "precision", "recall", "f1", "support"
        ));
        for (name, s) in &self.per_class {
            out.push_str(&format!(
                "{:<28} {:>9.2} {:>9.2} {:>9.2} {:>8}\n",
                name, s.precision, s.recall, s.f1, s.support
            ));
        }
        for d in &self.diagnostics {
            out.push_str(&format!("note: {d}\n"));
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Default, Clone, Copy)]
struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn scores(self) -> ClassScores {
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        ClassScores {
            precision,
            recall,
            f1: f1(precision, recall),
            support: self.tp + self.fn_,
            predicted: self.tp + self.fp,
        }
    }
}

fn check_lengths<T>(preds: &[T], golds: &[T]) -> Result<(), MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if golds.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Precision, recall and F1 of the fallacy class, plus accuracy.
pub fn detection_metrics(
    preds: &[DetectionLabel],
    golds: &[DetectionLabel],
) -> Result<MetricsReport, MetricsError> {
    check_lengths(preds, golds)?;
    let mut c = Counts::default();
    let mut correct = 0;
    for (p, g) in preds.iter().zip(golds) {
        match (p, g) {
            (DetectionLabel::Fallacy, DetectionLabel::Fallacy) => c.tp += 1,
            (DetectionLabel::Fallacy, DetectionLabel::NoFallacy) => c.fp += 1,
            (DetectionLabel::NoFallacy, DetectionLabel::Fallacy) => c.fn_ += 1,
            (DetectionLabel::NoFallacy, DetectionLabel::NoFallacy) => {}
        }
        if p == g {
            correct += 1;
        }
    }
    let scores = c.scores();
    Ok(MetricsReport {
        kind: MetricsKind::Detection,
        precision: scores.precision,
        recall: scores.recall,
        f1: scores.f1,
        accuracy: ratio(correct, golds.len()),
        total: golds.len(),
        per_class: BTreeMap::from([(DetectionLabel::Fallacy.name().to_string(), scores)]),
        diagnostics: Vec::new(),
    })
}

/// Macro precision, recall and F1 over gold classes, plus accuracy. Labels
/// are unified through `map` before scoring.
pub fn classification_metrics<S: AsRef<str>>(
    preds: &[S],
    golds: &[S],
    map: &LabelMap,
) -> Result<MetricsReport, MetricsError> {
    check_lengths(preds, golds)?;
    let preds: Vec<String> = preds.iter().map(|p| unify_label(p.as_ref(), map)).collect();
    let golds: Vec<String> = golds.iter().map(|g| unify_label(g.as_ref(), map)).collect();

    let mut counts: BTreeMap<&str, Counts> = BTreeMap::new();
    let mut correct = 0;
    for (p, g) in preds.iter().zip(&golds) {
        if p == g {
            correct += 1;
            counts.entry(g).or_default().tp += 1;
        } else {
            counts.entry(p).or_default().fp += 1;
            counts.entry(g).or_default().fn_ += 1;
        }
    }
    let gold_classes: BTreeSet<&str> = golds.iter().map(String::as_str).collect();

    let mut per_class = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for (name, c) in &counts {
        let s = c.scores();
        if gold_classes.contains(name) {
            sp += s.precision;
            sr += s.recall;
            sf += s.f1;
        } else {
            diagnostics.push(format!("class `{name}` is predicted but absent from gold; excluded from macro average"));
        }
        per_class.insert(name.to_string(), s);
    }
    let k = gold_classes.len() as f64;
    Ok(MetricsReport {
        kind: MetricsKind::Classification,
        precision: sp / k,
        recall: sr / k,
        f1: sf / k,
        accuracy: ratio(correct, golds.len()),
        total: golds.len(),
        per_class,
        diagnostics,
    })
}
