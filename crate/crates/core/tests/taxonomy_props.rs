use fallacy_tree_core::taxonomy::{RelationType, Taxonomy};
use proptest::prelude::*;

fn vocabulary(tax: &Taxonomy) -> Vec<String> {
    let mut words: Vec<String> = RelationType::ALL
        .iter()
        .flat_map(|r| tax.phrases(*r).flat_map(|p| p.split(' ')).map(String::from).collect::<Vec<_>>())
        .collect();
    words.extend(["dogs", "bark", "the", "of", "that"].map(String::from));
    words.sort();
    words.dedup();
    words
}

/// Every phrase of the taxonomy that matches at `start`, by brute force.
fn brute_matches(tax: &Taxonomy, tokens: &[String], start: usize) -> Vec<(String, RelationType)> {
    let mut out = Vec::new();
    for r in RelationType::ALL {
        for p in tax.phrases(r) {
            let parts: Vec<&str> = p.split(' ').collect();
            let end = start + parts.len();
            if end <= tokens.len() && tokens[start..end].iter().zip(&parts).all(|(a, b)| a.to_lowercase() == *b) {
                out.push((p.to_string(), r));
            }
        }
    }
    out
}

proptest! {
    #[test]
    fn longest_match_agrees_with_brute_force(picks in prop::collection::vec(0usize..1000, 1..8), upper in any::<bool>()) {
        let tax = Taxonomy::builtin();
        let vocab = vocabulary(&tax);
        let tokens: Vec<String> = picks.iter().map(|i| {
            let w = vocab[i % vocab.len()].clone();
            if upper { w.to_uppercase() } else { w }
        }).collect();
        for start in 0..tokens.len() {
            let brute = brute_matches(&tax, &tokens, start);
            let best = brute.iter().max_by_key(|(p, _)| p.split(' ').count());
            let got = tax.longest_match(&tokens, start);
            match (got, best) {
                (None, None) => {}
                (Some(m), Some((p, r))) => {
                    prop_assert_eq!(m.len, p.split(' ').count());
                    prop_assert_eq!(&m.phrase, p);
                    prop_assert_eq!(m.relation, *r);
                }
                (got, best) => prop_assert!(false, "got {:?}, expected {:?}", got, best),
            }
            prop_assert_eq!(tax.matches_at(&tokens, start).len(), brute.len());
        }
    }
}

#[test]
fn text_form_round_trips() {
    let tax = Taxonomy::builtin();
    let again = Taxonomy::parse(&tax.to_text()).unwrap();
    assert_eq!(again.to_text(), tax.to_text());
    assert_eq!(again.digest(), tax.digest());
    assert_eq!(tax.digest().len(), 64);
}
