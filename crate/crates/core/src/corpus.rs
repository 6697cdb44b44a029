//! Corpus records, trees files, and a fallback tokenizer for raw text.
//!
//! Corpus files hold one JSON object per line with `id`, `text`, `label` and
//! `split`. Trees files hold one bracketed tree per line, prefixed by the
//! record id and a tab; consecutive lines with the same id are the sentences
//! of one record.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{parse_bracketed, ConTree, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(CorpusError::UnknownSplit(other.to_string())),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    pub label: String,
    pub split: Split,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_corpus(text: &str) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord =
            serde_json::from_str(line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusRecord>, CorpusError> {
    parse_corpus(&read(path)?)
}

/// One line of a trees file.
#[derive(Debug, Clone)]
pub struct TreeLine {
    pub id: String,
    pub line: usize,
    pub tree: Result<ConTree, ParseError>,
}

/// Trees for one record, in file order.
#[derive(Debug, Clone)]
pub struct TreeGroup {
    pub id: String,
    pub lines: Vec<TreeLine>,
}

impl TreeGroup {
    /// Parsed sentence trees, or the first parse failure with its line.
    pub fn trees(&self) -> Result<Vec<ConTree>, (usize, ParseError)> {
        self.lines
            .iter()
            .map(|l| l.tree.clone().map_err(|e| (l.line, e)))
            .collect()
    }
}

/// Parses a trees file. Lines without an `id<TAB>` prefix form their own
/// record, named after their line number.
pub fn parse_trees(text: &str) -> Vec<TreeGroup> {
    let mut groups: Vec<TreeGroup> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, tree_text) = match line.split_once('\t') {
            Some((id, rest)) => (id.trim().to_string(), rest),
            None => (format!("line-{line_no}"), line),
        };
        let entry = TreeLine {
            id: id.clone(),
            line: line_no,
            tree: parse_bracketed(tree_text),
        };
        match groups.iter_mut().find(|g| g.id == id) {
            Some(group) => group.lines.push(entry),
            None => groups.push(TreeGroup { id, lines: vec![entry] }),
        }
    }
    groups
}

pub fn read_trees(path: &Path) -> Result<Vec<TreeGroup>, CorpusError> {
    Ok(parse_trees(&read(path)?))
}

const CLITICS: [&str; 7] = ["n't", "'s", "'d", "'ll", "'re", "'ve", "'m"];

/// Whitespace tokenization that also splits edge punctuation and English
/// clitics, so "don't." becomes `do n't .`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        let mut lead = Vec::new();
        while start < end && is_edge_punct(chars[start]) {
            lead.push(chars[start].to_string());
            start += 1;
        }
        let mut trail = Vec::new();
        while end > start && is_edge_punct(chars[end - 1]) {
            trail.push(chars[end - 1].to_string());
            end -= 1;
        }
        out.extend(lead);
        if start < end {
            let word: String = chars[start..end].iter().collect();
            let lower = word.to_lowercase();
            match CLITICS
                .iter()
                .find(|c| lower.ends_with(*c) && lower.len() > c.len())
            {
                Some(c) => {
                    let cut = word.len() - c.len();
                    out.push(word[..cut].to_string());
                    out.push(word[cut..].to_string());
                }
                None => out.push(word),
            }
        }
        out.extend(trail.into_iter().rev());
    }
    out
}

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation() && c != '\'' && c != '-' || matches!(c, '\u{201C}' | '\u{201D}' | '\u{2026}')
}
