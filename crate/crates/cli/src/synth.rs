//! Synthetic statements built by composing connective phrases with filler
//! clauses. Useful for stress-testing tree construction at scale.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use fallacy_tree_core::corpus::{CorpusRecord, Split};
use fallacy_tree_core::{RelationType, Taxonomy};

const SUBJECTS: [&str; 8] = ["dogs", "prices", "people", "taxes", "voters", "doctors", "schools", "farmers"];
const VERBS: [&str; 8] = ["bark", "rise", "complain", "fall", "vote", "agree", "grow", "work"];
const ADVERBS: [&str; 4] = ["quickly", "loudly", "rarely", "together"];
const LABELS: [&str; 4] = ["False Cause", "Red Herring", "Ad Hominem", "No Fallacy"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthStatement {
    pub id: String,
    /// One bracketed tree per sentence.
    pub sentences: Vec<String>,
    pub text: String,
    pub label: String,
    /// Every connective planted in the statement, in text order.
    pub planted: Vec<(RelationType, String)>,
}

impl SynthStatement {
    pub fn record(&self) -> CorpusRecord {
        CorpusRecord {
            id: self.id.clone(),
            text: self.text.clone(),
            label: self.label.clone(),
            split: Split::Test,
        }
    }

    /// Lines of a trees file.
    pub fn tree_lines(&self) -> String {
        self.sentences.iter().map(|s| format!("{}\t{}\n", self.id, s)).collect()
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    phrases: Vec<(RelationType, &'a str)>,
    words: Vec<String>,
    planted: Vec<(RelationType, String)>,
}

impl Gen<'_> {
    fn connective(&mut self) -> String {
        let (rel, phrase) = *self.phrases.choose(&mut self.rng).expect("taxonomy is not empty");
        self.planted.push((rel, phrase.to_string()));
        self.words.extend(phrase.split(' ').map(String::from));
        let parts: Vec<&str> = phrase.split(' ').collect();
        match parts.as_slice() {
            [one] => format!("(IN {one})"),
            many => format!(
                "(ADVP {})",
                many.iter().map(|p| format!("(RB {p})")).collect::<Vec<_>>().join(" ")
            ),
        }
    }

    fn filler(&mut self) -> String {
        let s = *SUBJECTS.choose(&mut self.rng).unwrap();
        let v = *VERBS.choose(&mut self.rng).unwrap();
        self.words.extend(["the".to_string(), s.to_string(), v.to_string()]);
        let mut vp = format!("(VBP {v})");
        if self.rng.random_bool(0.4) {
            let a = *ADVERBS.choose(&mut self.rng).unwrap();
            self.words.push(a.to_string());
            vp = format!("{vp} (ADVP (RB {a}))");
        }
        format!("(S (NP (DT the) (NNS {s})) (VP {vp}))")
    }

    fn clause(&mut self, depth: u32) -> String {
        let roll: f64 = self.rng.random();
        if depth == 0 || roll < 0.3 {
            return self.filler();
        }
        if roll < 0.7 {
            let a = self.clause(depth - 1);
            let w = self.connective();
            let b = self.clause(depth - 1);
            format!("(S {a} {w} {b})")
        } else {
            let w = self.connective();
            let a = self.clause(depth - 1);
            self.words.push(",".into());
            let b = self.clause(depth - 1);
            format!("(S (SBAR {w} {a}) (, ,) {b})")
        }
    }

    fn sentence(&mut self) -> String {
        let body = self.clause(3);
        self.words.push(".".into());
        format!("(ROOT (S {body} (. .)))")
    }
}

/// `count` statements, deterministic in `seed`. Roughly a fifth of them
/// have two sentences.
pub fn generate(taxonomy: &Taxonomy, count: usize, seed: u64) -> Vec<SynthStatement> {
    let phrases: Vec<(RelationType, &str)> = RelationType::ALL
        .iter()
        .flat_map(|r| taxonomy.phrases(*r).map(move |p| (*r, p)))
        .collect();
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        phrases,
        words: Vec::new(),
        planted: Vec::new(),
    };
    (0..count)
        .map(|i| {
            g.words.clear();
            g.planted.clear();
            let n = if g.rng.random_bool(0.2) { 2 } else { 1 };
            let sentences = (0..n).map(|_| g.sentence()).collect();
            let label = LABELS.choose(&mut g.rng).unwrap().to_string();
            SynthStatement {
                id: format!("synth-{i:04}"),
                sentences,
                text: g.words.join(" "),
                label,
                planted: g.planted.clone(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use fallacy_tree_core::parse_bracketed;

    #[test]
    fn deterministic_and_parseable() {
        let tax = Taxonomy::builtin();
        let a = generate(&tax, 30, 4);
        assert_eq!(a, generate(&tax, 30, 4));
        assert_ne!(a, generate(&tax, 30, 5));
        for s in &a {
            let mut tokens = Vec::new();
            for line in &s.sentences {
                tokens.extend(parse_bracketed(line).unwrap().tokens().to_vec());
            }
            assert_eq!(tokens.join(" "), s.text);
        }
    }
}
