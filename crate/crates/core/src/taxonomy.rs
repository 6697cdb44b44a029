//! The ten logical relations and the connective phrases that signal them.
//!
//! A [`Taxonomy`] maps every relation to a set of connective phrases. Phrases
//! are stored as lowercase token sequences and matched against tokenized text
//! with a longest-match rule, so that "not only" wins over "not" and
//! "only if" wins over "if".

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Maximum number of tokens in a single connective phrase.
pub const MAX_PHRASE_TOKENS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationType {
    Conjunction,
    Alternative,
    Restatement,
    Instantiation,
    Contrast,
    Concession,
    Analogy,
    Temporal,
    Condition,
    Causal,
}

impl RelationType {
    pub const ALL: [RelationType; 10] = [
        RelationType::Conjunction,
        RelationType::Alternative,
        RelationType::Restatement,
        RelationType::Instantiation,
        RelationType::Contrast,
        RelationType::Concession,
        RelationType::Analogy,
        RelationType::Temporal,
        RelationType::Condition,
        RelationType::Causal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RelationType::Conjunction => "conjunction",
            RelationType::Alternative => "alternative",
            RelationType::Restatement => "restatement",
            RelationType::Instantiation => "instantiation",
            RelationType::Contrast => "contrast",
            RelationType::Concession => "concession",
            RelationType::Analogy => "analogy",
            RelationType::Temporal => "temporal",
            RelationType::Condition => "condition",
            RelationType::Causal => "causal",
        }
    }

    /// Position of this relation in [`RelationType::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown relation name `{0}`")]
pub struct UnknownRelation(pub String);

impl FromStr for RelationType {
    type Err = UnknownRelation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        RelationType::ALL
            .iter()
            .copied()
            .find(|r| r.name() == lower)
            .ok_or_else(|| UnknownRelation(s.trim().to_string()))
    }
}

/// Connective phrases per relation, in the order they are listed in the
/// built-in table. Entries are lowercased surface forms.
const DEFAULT_CONNECTIVES: [(RelationType, &[&str]); 10] = [
    (
        RelationType::Conjunction,
        &["and", "as well as", "as well", "also", "separately"],
    ),
    (
        RelationType::Alternative,
        &["or", "either", "instead", "alternatively", "else", "nor", "neither"],
    ),
    (
        RelationType::Restatement,
        &[
            "specifically",
            "particularly",
            "in particular",
            "besides",
            "additionally",
            "in addition",
            "moreover",
            "furthermore",
            "plus",
            "not only",
            "indeed",
            "in other words",
            "in fact",
            "in short",
            "in the end",
            "overall",
            "in summary",
            "in details",
        ],
    ),
    (
        RelationType::Instantiation,
        &[
            "for example",
            "for instance",
            "such as",
            "including",
            "as an example",
            "an as instance",
            "for one thing",
        ],
    ),
    (
        RelationType::Contrast,
        &[
            "but",
            "however",
            "yet",
            "while",
            "unlike",
            "rather",
            "rather than",
            "in comparison",
            "by comparison",
            "on the other hand",
            "on the contrary",
            "contrary to",
            "in contrast",
            "by contrast",
            "whereas",
            "conversely",
            "not",
            "no",
            "none",
            "nothing",
            "n't",
        ],
    ),
    (
        RelationType::Concession,
        &[
            "although",
            "though",
            "despite",
            "despite of",
            "in spite of",
            "regardless",
            "regardless of",
            "nevertheless",
            "nonetheless",
            "even if",
            "even though",
            "even as",
            "even when",
            "even after",
            "even so",
            "no matter",
        ],
    ),
    (
        RelationType::Analogy,
        &[
            "likewise",
            "similarly",
            "as if",
            "as though",
            "just as",
            "just like",
            "namely",
        ],
    ),
    (
        RelationType::Temporal,
        &[
            "during",
            "before",
            "after",
            "when",
            "as soon as",
            "then",
            "next",
            "until",
            "till",
            "meanwhile",
            "in turn",
            "meantime",
            "afterwards",
            "simultaneously",
            "at the same time",
            "beforehand",
            "previously",
            "earlier",
            "later",
            "thereafter",
            "finally",
            "ultimately",
        ],
    ),
    (
        RelationType::Condition,
        &[
            "if",
            "as long as",
            "unless",
            "otherwise",
            "except",
            "whenever",
            "whichever",
            "once",
            "only if",
            "only when",
            "depend on",
        ],
    ),
    (
        RelationType::Causal,
        &[
            "because",
            "cause",
            "as a result",
            "result in",
            "due to",
            "therefore",
            "hence",
            "thus",
            "thereby",
            "since",
            "now that",
            "consequently",
            "in consequence",
            "in order to",
            "so as to",
            "so that",
            "why",
            "for",
            "accordingly",
            "given",
            "turn out",
        ],
    ),
];

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("failed to read taxonomy file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    UnknownRelation {
        line: usize,
        #[source]
        source: UnknownRelation,
    },
    #[error("line {line}: expected `<relation>: phrase | phrase ...`")]
    Syntax { line: usize },
    #[error("line {line}: empty connective phrase")]
    EmptyPhrase { line: usize },
    #[error("connective `{phrase}` has {len} tokens (limit {MAX_PHRASE_TOKENS})")]
    PhraseTooLong { phrase: String, len: usize },
    #[error("connective `{phrase}` is listed under both {first} and {second}")]
    DuplicatePhrase {
        phrase: String,
        first: RelationType,
        second: RelationType,
    },
}

/// A connective match against a token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectiveMatch {
    pub relation: RelationType,
    /// Lowercase tokens joined by single spaces.
    pub phrase: String,
    /// Number of tokens the phrase covers.
    pub len: usize,
}

/// Immutable relation → connective-phrase table with a phrase index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    entries: BTreeMap<RelationType, BTreeSet<String>>,
    index: HashMap<Vec<String>, RelationType>,
    longest: usize,
}

impl Taxonomy {
    /// The built-in ten-relation table.
    pub fn builtin() -> Self {
        let pairs = DEFAULT_CONNECTIVES
            .iter()
            .flat_map(|(rel, phrases)| phrases.iter().map(move |p| (*rel, p.to_string())));
        Self::from_pairs(pairs).expect("built-in taxonomy is valid")
    }

    /// Builds a validated taxonomy from (relation, phrase) pairs.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, TaxonomyError>
    where
        I: IntoIterator<Item = (RelationType, String)>,
    {
        let mut entries: BTreeMap<RelationType, BTreeSet<String>> =
            RelationType::ALL.iter().map(|r| (*r, BTreeSet::new())).collect();
        let mut index = HashMap::new();
        let mut longest = 0;
        for (relation, phrase) in pairs {
            let tokens = phrase_tokens(&phrase);
            if tokens.is_empty() {
                return Err(TaxonomyError::EmptyPhrase { line: 0 });
            }
            if tokens.len() > MAX_PHRASE_TOKENS {
                return Err(TaxonomyError::PhraseTooLong {
                    phrase,
                    len: tokens.len(),
                });
            }
            let key = tokens.join(" ");
            match index.get(&tokens) {
                Some(&existing) if existing != relation => {
                    return Err(TaxonomyError::DuplicatePhrase {
                        phrase: key,
                        first: existing,
                        second: relation,
                    });
                }
                _ => {}
            }
            longest = longest.max(tokens.len());
            index.insert(tokens, relation);
            entries.entry(relation).or_default().insert(key);
        }
        Ok(Taxonomy {
            entries,
            index,
            longest,
        })
    }

    /// Parses the line-oriented taxonomy format:
    /// `<relation>: phrase1 | phrase2 | ...`, `#` comments and blank lines
    /// ignored. A relation may appear on several lines.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (name, rest) = line
                .split_once(':')
                .ok_or(TaxonomyError::Syntax { line: line_no })?;
            let relation: RelationType = name
                .parse()
                .map_err(|source| TaxonomyError::UnknownRelation {
                    line: line_no,
                    source,
                })?;
            for phrase in rest.split('|') {
                if phrase.trim().is_empty() {
                    return Err(TaxonomyError::EmptyPhrase { line: line_no });
                }
                pairs.push((relation, phrase.to_string()));
            }
        }
        Self::from_pairs(pairs)
    }

    pub fn phrases(&self, relation: RelationType) -> impl Iterator<Item = &str> {
        self.entries
            .get(&relation)
            .into_iter()
            .flat_map(|set| set.iter().map(String::as_str))
    }

    /// Relation for an exact phrase (any case, whitespace-tokenized).
    pub fn relation_of(&self, phrase: &str) -> Option<RelationType> {
        self.index.get(&phrase_tokens(phrase)).copied()
    }

    /// Relation for a token sequence that must equal a phrase exactly.
    pub fn lookup_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Option<RelationType> {
        if tokens.is_empty() || tokens.len() > self.longest {
            return None;
        }
        let key: Vec<String> = tokens.iter().map(|t| t.as_ref().to_lowercase()).collect();
        self.index.get(&key).copied()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Longest phrase matching `tokens[start..]`.
    pub fn longest_match<S: AsRef<str>>(&self, tokens: &[S], start: usize) -> Option<ConnectiveMatch> {
        self.matches_at(tokens, start).into_iter().next_back()
    }

    /// Every phrase matching at `start`, shortest first.
    pub fn matches_at<S: AsRef<str>>(&self, tokens: &[S], start: usize) -> Vec<ConnectiveMatch> {
        if start >= tokens.len() {
            return Vec::new();
        }
        let max = self.longest.min(tokens.len() - start);
        let mut key: Vec<String> = Vec::with_capacity(max);
        let mut found = Vec::new();
        for tok in &tokens[start..start + max] {
            key.push(tok.as_ref().to_lowercase());
            if let Some(&relation) = self.index.get(&key) {
                found.push(ConnectiveMatch {
                    relation,
                    phrase: key.join(" "),
                    len: key.len(),
                });
            }
        }
        found
    }

    /// Canonical text form, suitable for writing back out with [`Taxonomy::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (rel, phrases) in &self.entries {
            out.push_str(rel.name());
            out.push_str(": ");
            out.push_str(&phrases.iter().cloned().collect::<Vec<_>>().join(" | "));
            out.push('\n');
        }
        out
    }

    /// SHA-256 of the canonical text form, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Loads a taxonomy file, or the built-in table when `source` is `None`.
pub fn load_taxonomy(source: Option<&Path>) -> Result<Taxonomy, TaxonomyError> {
    match source {
        None => Ok(Taxonomy::builtin()),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| TaxonomyError::Io {
                path: path.display().to_string(),
                source,
            })?;
            Taxonomy::parse(&text)
        }
    }
}

fn phrase_tokens(phrase: &str) -> Vec<String> {
    phrase.split_whitespace().map(str::to_lowercase).collect()
}
