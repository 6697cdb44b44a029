use std::collections::{BTreeMap, BTreeSet};

use fallacy_tree_core::eval_metrics::{classification_metrics, detection_metrics, DetectionLabel, LabelMap};
use proptest::prelude::*;

/// Precision, recall, F1 from a full confusion matrix.
fn oracle(preds: &[String], golds: &[String]) -> (BTreeMap<String, (f64, f64, f64)>, f64, f64, f64, f64) {
    let labels: BTreeSet<&String> = preds.iter().chain(golds).collect();
    let mut matrix: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (p, g) in preds.iter().zip(golds) {
        *matrix.entry((g.as_str(), p.as_str())).or_default() += 1;
    }
    let cell = |g: &str, p: &str| matrix.get(&(g, p)).copied().unwrap_or(0);
    let pct = |a: usize, b: usize| if b == 0 { 0.0 } else { 100.0 * a as f64 / b as f64 };
    let mut per = BTreeMap::new();
    for c in &labels {
        let tp = cell(c, c);
        let col: usize = labels.iter().map(|g| cell(g, c)).sum();
        let row: usize = labels.iter().map(|p| cell(c, p)).sum();
        let p = pct(tp, col);
        let r = pct(tp, row);
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        per.insert(c.to_string(), (p, r, f));
    }
    let gold: BTreeSet<&String> = golds.iter().collect();
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for (name, (p, r, f)) in &per {
        if gold.contains(name) {
            sp += p;
            sr += r;
            sf += f;
        }
    }
    let k = gold.len() as f64;
    let correct = labels.iter().map(|c| cell(c, c)).sum();
    (per, sp / k, sr / k, sf / k, pct(correct, golds.len()))
}

const LABELS: [&str; 5] = ["Ad Hominem", "Red Herring", "Strawman", "False Cause", "No Fallacy"];

fn pairs() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..LABELS.len(), 0..LABELS.len()), 1..60)
}

proptest! {
    #[test]
    fn classification_matches_confusion_matrix(pairs in pairs()) {
        let preds: Vec<String> = pairs.iter().map(|(p, _)| LABELS[*p].to_string()).collect();
        let golds: Vec<String> = pairs.iter().map(|(_, g)| LABELS[*g].to_string()).collect();
        let r = classification_metrics(&preds, &golds, &LabelMap::builtin()).unwrap();
        let (per, p, rc, f, acc) = oracle(&preds, &golds);
        prop_assert_eq!(r.precision.to_bits(), p.to_bits());
        prop_assert_eq!(r.recall.to_bits(), rc.to_bits());
        prop_assert_eq!(r.f1.to_bits(), f.to_bits());
        prop_assert_eq!(r.accuracy.to_bits(), acc.to_bits());
        for (name, (pp, rr, ff)) in per {
            let s = r.per_class[&name];
            prop_assert_eq!((s.precision, s.recall, s.f1), (pp, rr, ff));
        }
        for v in [r.precision, r.recall, r.f1, r.accuracy] {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }

    #[test]
    fn detection_matches_confusion_matrix(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
        let lab = |b: bool| if b { DetectionLabel::Fallacy } else { DetectionLabel::NoFallacy };
        let preds: Vec<DetectionLabel> = pairs.iter().map(|(p, _)| lab(*p)).collect();
        let golds: Vec<DetectionLabel> = pairs.iter().map(|(_, g)| lab(*g)).collect();
        let r = detection_metrics(&preds, &golds).unwrap();
        let names = |v: &[DetectionLabel]| v.iter().map(|l| l.name().to_string()).collect::<Vec<_>>();
        let (per, _, _, _, acc) = oracle(&names(&preds), &names(&golds));
        let (p, rc, f) = per.get("fallacy").copied().unwrap_or((0.0, 0.0, 0.0));
        prop_assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (p, rc, f, acc));
    }

    #[test]
    fn order_of_pairs_does_not_matter(pairs in pairs(), rot in 0usize..60) {
        let preds: Vec<&str> = pairs.iter().map(|(p, _)| LABELS[*p]).collect();
        let golds: Vec<&str> = pairs.iter().map(|(_, g)| LABELS[*g]).collect();
        let k = rot % preds.len();
        let (mut p2, mut g2) = (preds.clone(), golds.clone());
        p2.rotate_left(k);
        g2.rotate_left(k);
        let map = LabelMap::builtin();
        let a = classification_metrics(&preds, &golds, &map).unwrap();
        let b = classification_metrics(&p2, &g2, &map).unwrap();
        prop_assert_eq!(a, b);
    }
}
