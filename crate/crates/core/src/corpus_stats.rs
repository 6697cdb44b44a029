//! Per-class share of samples that contain each logical relation.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval_metrics::DetectionLabel;
use crate::logic_tree::{LogicNode, LogicTree};
use crate::taxonomy::{RelationType, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresenceMode {
    /// Relations anchored in the logical structure tree.
    Tree,
    /// Any connective occurrence in the token stream.
    Raw,
}

impl FromStr for PresenceMode {
    type Err = StatsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(PresenceMode::Tree),
            "raw" => Ok(PresenceMode::Raw),
            other => Err(StatsError::UnknownMode(other.to_string())),
        }
    }
}

/// How sample labels are grouped into table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassGrouping {
    /// One row per fallacy label.
    Label,
    /// `fallacy` vs `no fallacy`.
    Binary,
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no samples to count")]
    EmptyCorpus,
    #[error("sample `{0}` has no logical structure tree")]
    MissingTree(String),
    #[error("unknown mode `{0}` (expected tree or raw)")]
    UnknownMode(String),
}

/// One statement to be counted.
#[derive(Debug, Clone)]
pub struct Sample<'a> {
    pub id: &'a str,
    pub label: &'a str,
    pub tokens: &'a [String],
    pub tree: Option<&'a LogicTree>,
}

/// Relations of all internal nodes.
pub fn relation_presence(tree: &LogicTree) -> BTreeSet<RelationType> {
    tree.root
        .walk()
        .into_iter()
        .filter_map(|n| match n {
            LogicNode::Internal { relation, .. } => Some(*relation),
            LogicNode::Leaf { .. } => None,
        })
        .collect()
}

/// Relations of every connective occurrence, overlapping ones included.
pub fn raw_presence<S: AsRef<str>>(tokens: &[S], taxonomy: &Taxonomy) -> BTreeSet<RelationType> {
    (0..tokens.len())
        .flat_map(|i| taxonomy.matches_at(tokens, i))
        .map(|m| m.relation)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub class: String,
    pub samples: usize,
    /// Percent of samples containing each relation, in `RelationType::ALL` order.
    pub ratios: [f64; 10],
}

impl ClassRow {
    pub fn ratio(&self, relation: RelationType) -> f64 {
        self.ratios[relation.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationPresenceTable {
    pub dataset: String,
    pub mode: PresenceMode,
    pub rows: Vec<ClassRow>,
}

impl RelationPresenceTable {
    pub fn row(&self, class: &str) -> Option<&ClassRow> {
        self.rows.iter().find(|r| r.class == class)
    }

    /// Comma-separated table, two decimals per ratio.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,class,samples");
        for rel in RelationType::ALL {
            out.push(',');
            out.push_str(rel.name());
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{},{},{}", csv_field(&self.dataset), csv_field(&row.class), row.samples));
            for r in row.ratios {
                out.push_str(&format!(",{r:.2}"));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn class_of(label: &str, grouping: ClassGrouping) -> String {
    match grouping {
        ClassGrouping::Label => label.to_string(),
        ClassGrouping::Binary => match DetectionLabel::from_label(label) {
            DetectionLabel::Fallacy => "fallacy".to_string(),
            DetectionLabel::NoFallacy => "no fallacy".to_string(),
        },
    }
}

pub fn class_distribution(
    dataset: &str,
    samples: &[Sample<'_>],
    taxonomy: &Taxonomy,
    mode: PresenceMode,
    grouping: ClassGrouping,
) -> Result<RelationPresenceTable, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let mut counts: BTreeMap<String, (usize, [usize; 10])> = BTreeMap::new();
    for s in samples {
        let present = match mode {
            PresenceMode::Tree => relation_presence(s.tree.ok_or_else(|| StatsError::MissingTree(s.id.to_string()))?),
            PresenceMode::Raw => raw_presence(s.tokens, taxonomy),
        };
        let entry = counts.entry(class_of(s.label, grouping)).or_default();
        entry.0 += 1;
        for rel in present {
            entry.1[rel.index()] += 1;
        }
    }
    let rows = counts
        .into_iter()
        .map(|(class, (n, hits))| ClassRow {
            class,
            samples: n,
            ratios: hits.map(|h| 100.0 * h as f64 / n as f64),
        })
        .collect();
    Ok(RelationPresenceTable {
        dataset: dataset.to_string(),
        mode,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic_tree::build_logic_tree;
    use crate::syntax::parse_bracketed;

    fn tree(src: &str) -> LogicTree {
        build_logic_tree(&[parse_bracketed(src).unwrap()], &Taxonomy::builtin())
    }

    #[test]
    fn presence_is_a_set() {
        let t = tree("(S (S (S a) (IN because) (S b)) (, ,) (RB therefore) (S c))");
        assert_eq!(relation_presence(&t), BTreeSet::from([RelationType::Causal]));
        let leaf = tree("(S (NNS dogs) (VBP bark))");
        assert!(relation_presence(&leaf).is_empty());
    }

    #[test]
    fn one_causal_record() {
        let t = tree("(S (S a) (IN because) (S b))");
        let samples = [Sample {
            id: "1",
            label: "False Cause",
            tokens: &t.tokens,
            tree: Some(&t),
        }];
        let table = class_distribution("x", &samples, &Taxonomy::builtin(), PresenceMode::Tree, ClassGrouping::Label).unwrap();
        let row = table.row("False Cause").unwrap();
        assert_eq!(row.ratio(RelationType::Causal), 100.0);
        assert_eq!(row.ratios.iter().sum::<f64>(), 100.0);
    }

    #[test]
    fn half_conjunction() {
        let a = tree("(S (S a) (CC and) (S b))");
        let b = tree("(S (NN c))");
        let samples = [
            Sample { id: "a", label: "Red Herring", tokens: &a.tokens, tree: Some(&a) },
            Sample { id: "b", label: "Strawman", tokens: &b.tokens, tree: Some(&b) },
        ];
        let table = class_distribution("x", &samples, &Taxonomy::builtin(), PresenceMode::Tree, ClassGrouping::Binary).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.row("fallacy").unwrap().ratio(RelationType::Conjunction), 50.0);
        let csv = table.to_csv();
        assert!(csv.starts_with("dataset,class,samples,conjunction,"));
        assert!(csv.contains("x,fallacy,2,50.00,"));
    }

    #[test]
    fn raw_counts_overlapping_phrases() {
        let toks: Vec<String> = "not only that".split(' ').map(String::from).collect();
        let rels = raw_presence(&toks, &Taxonomy::builtin());
        assert_eq!(rels, BTreeSet::from([RelationType::Restatement, RelationType::Contrast]));
    }

    #[test]
    fn empty_and_missing_tree() {
        let tax = Taxonomy::builtin();
        assert!(matches!(
            class_distribution("x", &[], &tax, PresenceMode::Raw, ClassGrouping::Label),
            Err(StatsError::EmptyCorpus)
        ));
        let toks = vec!["a".to_string()];
        let s = [Sample { id: "q", label: "L", tokens: &toks, tree: None }];
        assert!(matches!(
            class_distribution("x", &s, &tax, PresenceMode::Tree, ClassGrouping::Label),
            Err(StatsError::MissingTree(_))
        ));
    }
}
