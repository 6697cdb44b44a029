use fallacy_tree_core::syntax::{parse_bracketed, ConTree, NodeId};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Shape {
    Word(String),
    Tagged(String, String),
    Phrase(String, Vec<Shape>),
}

fn render(s: &Shape) -> String {
    match s {
        Shape::Word(w) => w.clone(),
        Shape::Tagged(t, w) => format!("({t} {w})"),
        Shape::Phrase(l, kids) => {
            let inner: Vec<String> = kids.iter().map(render).collect();
            format!("({l} {})", inner.join(" "))
        }
    }
}

fn words(s: &Shape, out: &mut Vec<String>) {
    match s {
        Shape::Word(w) | Shape::Tagged(_, w) => out.push(w.clone()),
        Shape::Phrase(_, kids) => kids.iter().for_each(|k| words(k, out)),
    }
}

fn token() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z]{1,6}",
        Just("n't".to_string()),
        Just("'d".to_string()),
        Just(",".to_string()),
        Just("(".to_string()),
        Just(")".to_string()),
        Just("{".to_string()),
    ]
}

fn escape(w: &str) -> String {
    match w {
        "(" => "-LRB-".into(),
        ")" => "-RRB-".into(),
        "{" => "-LCB-".into(),
        other => other.into(),
    }
}

fn shape() -> impl Strategy<Value = Shape> {
    let leaf = prop_oneof![
        ("[A-Z]{1,3}", token()).prop_map(|(t, w)| Shape::Tagged(t, escape(&w))),
        "[a-z]{1,5}".prop_map(Shape::Word),
    ];
    leaf.prop_recursive(5, 40, 4, |inner| {
        ("[A-Z]{1,4}", prop::collection::vec(inner, 1..4)).prop_map(|(l, k)| Shape::Phrase(l, k))
    })
}

fn root_shape() -> impl Strategy<Value = Shape> {
    prop::collection::vec(shape(), 1..4).prop_map(|k| Shape::Phrase("ROOT".into(), k))
}

fn unescape(w: &str) -> String {
    match w {
        "-LRB-" => "(".into(),
        "-RRB-" => ")".into(),
        "-LCB-" => "{".into(),
        other => other.into(),
    }
}

fn all_ids(t: &ConTree) -> Vec<NodeId> {
    t.nodes().map(|(id, _)| id).collect()
}

proptest! {
    #[test]
    fn round_trips_through_text(s in root_shape()) {
        let text = render(&s);
        let t = parse_bracketed(&text).unwrap();
        let again = parse_bracketed(&t.to_bracketed()).unwrap();
        prop_assert_eq!(&t, &again);
        let mut expected = Vec::new();
        words(&s, &mut expected);
        let expected: Vec<String> = expected.iter().map(|w| unescape(w)).collect();
        prop_assert_eq!(t.tokens(), expected.as_slice());
    }

    #[test]
    fn spans_nest_and_cover(s in root_shape()) {
        let t = parse_bracketed(&render(&s)).unwrap();
        prop_assert_eq!(t.leaf_text(t.root()), t.tokens());
        for id in all_ids(&t) {
            let node = t.node(id);
            prop_assert_eq!(t.leaf_text(id).len(), node.span.len());
            if !node.children.is_empty() {
                let mut at = node.span.start;
                for c in &node.children {
                    let cs = t.node(*c).span;
                    prop_assert_eq!(cs.start, at);
                    at = cs.end;
                    prop_assert_eq!(t.parent(*c), Some(id));
                    prop_assert_eq!(t.node(*c).depth, node.depth + 1);
                }
                prop_assert_eq!(at, node.span.end);
            }
        }
    }

    #[test]
    fn level_order_is_a_breadth_first_permutation(s in root_shape()) {
        let t = parse_bracketed(&render(&s)).unwrap();
        let order = t.level_order(t.root(), None);
        let mut sorted: Vec<usize> = order.iter().map(|n| n.0).collect();
        sorted.sort();
        prop_assert_eq!(sorted, (0..t.len()).collect::<Vec<_>>());
        let depths: Vec<usize> = order.iter().map(|n| t.node(*n).depth).collect();
        prop_assert!(depths.windows(2).all(|w| w[0] <= w[1]));
        // siblings keep their left-to-right order
        for id in all_ids(&t) {
            let pos: Vec<usize> = t.node(id).children.iter()
                .map(|c| order.iter().position(|o| o == c).unwrap())
                .collect();
            prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn level_order_filter_keeps_contained_nodes(s in root_shape(), a in 0usize..20, b in 0usize..20) {
        let t = parse_bracketed(&render(&s)).unwrap();
        let n = t.tokens().len();
        let (lo, hi) = (a.min(b).min(n), a.max(b).min(n));
        let within = fallacy_tree_core::Span::new(lo, hi);
        let full = t.level_order(t.root(), None);
        let kept = t.level_order(t.root(), Some(within));
        let expected: Vec<NodeId> = full.into_iter().filter(|id| within.contains(t.node(*id).span)).collect();
        prop_assert_eq!(kept, expected);
    }
}

#[test]
fn rejects_malformed_input() {
    for bad in ["", "(S (NN x)", "(S (NN x)))", "(S)", "(S (NN x)) trailing", "word"] {
        assert!(parse_bracketed(bad).is_err(), "{bad:?} should fail");
    }
}
