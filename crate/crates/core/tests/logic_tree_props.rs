use std::collections::BTreeSet;

use fallacy_tree_core::corpus_stats::{raw_presence, relation_presence};
use fallacy_tree_core::logic_tree::{build_logic_tree, LogicNode, LogicTree};
use fallacy_tree_core::span::Span;
use fallacy_tree_core::syntax::{parse_bracketed, ConTree};
use fallacy_tree_core::{RelationType, Taxonomy};
use proptest::prelude::*;

const FILLER: [&str; 10] = ["dogs", "cats", "prices", "people", "bark", "sleep", "rise", "fall", "quickly", "loudly"];

#[derive(Debug, Clone)]
enum Clause {
    Filler(Vec<&'static str>),
    /// `A w B`
    Infix(Box<Clause>, String, Box<Clause>),
    /// `w A , B`
    Prefix(String, Box<Clause>, Box<Clause>),
}

#[derive(Debug, PartialEq)]
enum Expected {
    Leaf(String),
    Node(RelationType, String, Box<Expected>, Box<Expected>),
}

fn phrases() -> Vec<String> {
    let tax = Taxonomy::builtin();
    RelationType::ALL.iter().flat_map(|r| tax.phrases(*r).map(String::from).collect::<Vec<_>>()).collect()
}

fn clause() -> impl Strategy<Value = Clause> {
    let all = phrases();
    let leaf = prop::collection::vec(prop::sample::select(FILLER.to_vec()), 1..4).prop_map(Clause::Filler);
    leaf.prop_recursive(4, 24, 2, move |inner| {
        let p = prop::sample::select(all.clone());
        prop_oneof![
            (inner.clone(), p.clone(), inner.clone()).prop_map(|(a, w, b)| Clause::Infix(Box::new(a), w, Box::new(b))),
            (p, inner.clone(), inner).prop_map(|(w, a, b)| Clause::Prefix(w, Box::new(a), Box::new(b))),
        ]
    })
}

fn connective(w: &str) -> String {
    let parts: Vec<&str> = w.split(' ').collect();
    match parts.as_slice() {
        [one] => format!("(CC {one})"),
        many => format!("(ADVP {})", many.iter().map(|p| format!("(RB {p})")).collect::<Vec<_>>().join(" ")),
    }
}

fn render(c: &Clause) -> String {
    match c {
        Clause::Filler(ws) => format!("(S {})", ws.iter().map(|w| format!("(NN {w})")).collect::<Vec<_>>().join(" ")),
        Clause::Infix(a, w, b) => format!("(S {} {} {})", render(a), connective(w), render(b)),
        Clause::Prefix(w, a, b) => format!("(S (SBAR {} {}) (, ,) {})", connective(w), render(a), render(b)),
    }
}

/// Structure implied by how the clause was assembled: infix connectives
/// take their neighbours, fronted ones take the main clause as the left
/// argument and their own clause as the right.
fn expected(c: &Clause, tax: &Taxonomy) -> Expected {
    match c {
        Clause::Filler(ws) => Expected::Leaf(ws.join(" ")),
        Clause::Infix(a, w, b) => Expected::Node(tax.relation_of(w).unwrap(), w.clone(), Box::new(expected(a, tax)), Box::new(expected(b, tax))),
        Clause::Prefix(w, a, b) => Expected::Node(tax.relation_of(w).unwrap(), w.clone(), Box::new(expected(b, tax)), Box::new(expected(a, tax))),
    }
}

fn observed(t: &LogicTree, n: &LogicNode) -> Expected {
    match n {
        LogicNode::Leaf { span, .. } => Expected::Leaf(t.text(span)),
        LogicNode::Internal { relation, connective, left, right, .. } => {
            Expected::Node(*relation, connective.clone(), Box::new(observed(t, left)), Box::new(observed(t, right)))
        }
    }
}

fn connective_spans(t: &LogicTree) -> Vec<Span> {
    t.root
        .walk()
        .into_iter()
        .filter_map(|n| match n {
            LogicNode::Internal { connective_span, .. } => Some(*connective_span),
            LogicNode::Leaf { .. } => None,
        })
        .collect()
}

/// Every constituent inside a leaf whose whole text is a connective must
/// overlap a connective that was used or rejected.
fn leaves_are_exhausted(con: &ConTree, t: &LogicTree, tax: &Taxonomy) -> bool {
    let mut consumed = connective_spans(t);
    consumed.extend(&t.rejected);
    t.root.walk().into_iter().all(|n| match n {
        LogicNode::Leaf { span, .. } => con.nodes().all(|(id, node)| {
            !span.contains_span(node.span)
                || node.span.is_empty()
                || tax.lookup_tokens(con.leaf_text(id)).is_none()
                || consumed.iter().any(|c| c.overlaps(node.span))
        }),
        LogicNode::Internal { .. } => true,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn generated_statements(c in clause()) {
        let tax = Taxonomy::builtin();
        let con = parse_bracketed(&format!("(ROOT {})", render(&c))).unwrap();
        let t = build_logic_tree(std::slice::from_ref(&con), &tax);

        prop_assert_eq!(observed(&t, &t.root), expected(&c, &tax));

        let spans = connective_spans(&t);
        for (i, a) in spans.iter().enumerate() {
            for b in &spans[i + 1..] {
                prop_assert!(!a.overlaps(*b));
            }
        }
        prop_assert!(leaves_are_exhausted(&con, &t, &tax));

        let again = build_logic_tree(std::slice::from_ref(&con), &tax);
        prop_assert_eq!(serde_json::to_string(&t).unwrap(), serde_json::to_string(&again).unwrap());

        let tree_rel = relation_presence(&t);
        let raw_rel: BTreeSet<RelationType> = raw_presence(&t.tokens, &tax);
        prop_assert!(tree_rel.is_subset(&raw_rel));
    }

    #[test]
    fn serialization_round_trips(c in clause()) {
        let tax = Taxonomy::builtin();
        let con = parse_bracketed(&format!("(ROOT {})", render(&c))).unwrap();
        let t = build_logic_tree(&[con], &tax);
        let back: LogicTree = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn unanchored_connective_is_rejected_and_search_continues() {
    let tax = Taxonomy::builtin();
    // the leading "and" has nothing on its left, so the later "because" anchors
    let con = parse_bracketed("(ROOT (S (S (CC and)) (S (NN dogs) (VBP bark)) (IN because) (S (NNS cats) (VBP hiss))))").unwrap();
    let t = build_logic_tree(&[con], &tax);
    assert!(!t.rejected.is_empty());
    assert_eq!(t.relations(), vec![(RelationType::Causal, "because")]);
}
