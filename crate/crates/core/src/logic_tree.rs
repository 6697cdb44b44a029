//! Logical structure trees: connectives as internal nodes, argument text
//! as leaves.
//!
//! Construction walks the constituency tree breadth first, anchors the first
//! constituent whose text is a taxonomy connective, extracts its two
//! arguments from the surrounding constituents, and recurses into each
//! argument region. A match whose arguments cannot be extracted is marked
//! consumed and the search continues in the same region.

use serde::{Deserialize, Serialize};

use crate::span::{Region, Span};
use crate::syntax::{ConTree, NodeId};
use crate::taxonomy::{RelationType, Taxonomy};

/// Label of the synthetic root placed over multi-sentence statements.
pub const STATEMENT_ROOT_LABEL: &str = "DOC";

/// A constituent whose text equals a connective phrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSite {
    pub connective: String,
    pub relation: RelationType,
    pub node: NodeId,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LogicNode {
    Internal {
        relation: RelationType,
        connective: String,
        connective_span: Span,
        /// Region this relation was built over (both arguments plus the
        /// connective, before trimming).
        span: Region,
        left: Box<LogicNode>,
        right: Box<LogicNode>,
    },
    Leaf {
        span: Region,
        text: String,
    },
}

impl LogicNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self, LogicNode::Leaf { .. })
    }

    pub fn region(&self) -> &Region {
        match self {
            LogicNode::Internal { span, .. } | LogicNode::Leaf { span, .. } => span,
        }
    }

    /// Number of levels; a lone leaf has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            LogicNode::Leaf { .. } => 1,
            LogicNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Pre-order walk over all nodes.
    pub fn walk(&self) -> Vec<&LogicNode> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            if let LogicNode::Internal { left, right, .. } = node {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    pub fn internal_count(&self) -> usize {
        self.walk().iter().filter(|n| !n.is_leaf()).count()
    }
}

/// A statement's logical structure tree together with its token space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicTree {
    pub tokens: Vec<String>,
    pub root: LogicNode,
    /// Connective matches that could not anchor a relation.
    #[serde(default)]
    pub rejected: Vec<Span>,
}

impl LogicTree {
    /// Space-joined tokens of `region`.
    pub fn text(&self, region: &Region) -> String {
        region.tokens(&self.tokens).collect::<Vec<_>>().join(" ")
    }

    /// Every relation used in the tree, with its connective, in pre-order.
    pub fn relations(&self) -> Vec<(RelationType, &str)> {
        self.root
            .walk()
            .into_iter()
            .filter_map(|n| match n {
                LogicNode::Internal {
                    relation, connective, ..
                } => Some((*relation, connective.as_str())),
                LogicNode::Leaf { .. } => None,
            })
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }
}

/// True for tokens made only of punctuation characters.
pub fn is_punctuation(token: &str) -> bool {
    !token.is_empty()
        && token.chars().all(|c| {
            c.is_ascii_punctuation()
                || matches!(
                    c,
                    '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}' | '\u{00AB}' | '\u{00BB}'
                )
        })
}

fn trim(region: &Region, tokens: &[String]) -> Region {
    region.trim_by(|i| is_punctuation(&tokens[i]))
}

/// One constituency tree per sentence becomes one statement tree; several
/// sentences are placed under a synthetic root so their tokens share an
/// index space.
pub fn statement_tree(trees: &[ConTree]) -> ConTree {
    match trees {
        [single] => single.clone(),
        many => ConTree::wrap(STATEMENT_ROOT_LABEL, many),
    }
}

/// First constituent, in level order, lying inside `within` whose lowercased
/// text is a connective and which does not overlap any `consumed` span.
pub fn find_first_match(
    tree: &ConTree,
    within: &Region,
    taxonomy: &Taxonomy,
    consumed: &[Span],
) -> Option<MatchSite> {
    tree.level_order_in(tree.root(), within)
        .into_iter()
        .find_map(|id| {
            let span = tree.node(id).span;
            if span.is_empty() || consumed.iter().any(|c| c.overlaps(span)) {
                return None;
            }
            let text = tree.leaf_text(id);
            let relation = taxonomy.lookup_tokens(text)?;
            Some(MatchSite {
                connective: text.iter().map(|t| t.to_lowercase()).collect::<Vec<_>>().join(" "),
                relation,
                node: id,
                span,
            })
        })
}

/// Arguments of `site` over the whole tree.
pub fn extract_arguments(tree: &ConTree, site: &MatchSite) -> Option<(Region, Region)> {
    extract_arguments_within(tree, site, &Region::from_span(tree.span()))
}

/// Left and right argument regions of `site`, clipped to `within`.
///
/// With `P` the nearest ancestor whose (clipped) text is larger than the
/// connective: if `P` reads `α w β` the arguments are `α` and `β`. If `P`
/// reads `w β`, the left argument is the text of the nearest larger ancestor
/// `G` minus the text of `P`; `α w` is handled symmetrically. Arguments are
/// trimmed of edge punctuation; `None` if either one ends up empty.
pub fn extract_arguments_within(
    tree: &ConTree,
    site: &MatchSite,
    within: &Region,
) -> Option<(Region, Region)> {
    let tokens = tree.tokens();
    let clipped = |id: NodeId| within.intersect_span(tree.node(id).span);
    let cs = site.span;

    let mut parent = tree.parent(site.node)?;
    while clipped(parent).len() <= cs.len() {
        parent = tree.parent(parent)?;
    }
    let pspan = tree.node(parent).span;
    let alpha = trim(&within.intersect_span(Span::new(pspan.start, cs.start)), tokens);
    let beta = trim(&within.intersect_span(Span::new(cs.end, pspan.end)), tokens);

    let remainder = || -> Option<Region> {
        let base = clipped(parent).len();
        let mut cur = parent;
        loop {
            cur = tree.parent(cur)?;
            let region = clipped(cur);
            if region.len() <= base {
                continue;
            }
            let rest = trim(&region.subtract_span(pspan), tokens);
            if !rest.is_empty() {
                return Some(rest);
            }
        }
    };

    match (alpha.is_empty(), beta.is_empty()) {
        (false, false) => Some((alpha, beta)),
        (true, false) => Some((remainder()?, beta)),
        (false, true) => Some((alpha, remainder()?)),
        (true, true) => None,
    }
}

/// Builds the logical structure tree of a statement given its per-sentence
/// constituency trees.
pub fn build_logic_tree(trees: &[ConTree], taxonomy: &Taxonomy) -> LogicTree {
    build_from_statement(&statement_tree(trees), taxonomy)
}

/// Builds from an already combined statement tree.
pub fn build_from_statement(tree: &ConTree, taxonomy: &Taxonomy) -> LogicTree {
    let tokens = tree.tokens().to_vec();
    let mut builder = Builder {
        tree,
        taxonomy,
        used: Vec::new(),
        rejected: Vec::new(),
    };
    let full = if tree.is_empty() {
        Region::empty()
    } else {
        trim(&Region::from_span(tree.span()), &tokens)
    };
    let root = builder.build(full);
    LogicTree {
        tokens,
        root,
        rejected: builder.rejected,
    }
}

struct Builder<'a> {
    tree: &'a ConTree,
    taxonomy: &'a Taxonomy,
    used: Vec<Span>,
    rejected: Vec<Span>,
}

impl Builder<'_> {
    fn build(&mut self, region: Region) -> LogicNode {
        loop {
            let consumed: Vec<Span> = self.used.iter().chain(&self.rejected).copied().collect();
            let Some(site) = find_first_match(self.tree, &region, self.taxonomy, &consumed) else {
                let text = region.tokens(self.tree.tokens()).collect::<Vec<_>>().join(" ");
                return LogicNode::Leaf { span: region, text };
            };
            match extract_arguments_within(self.tree, &site, &region) {
                Some((left, right)) => {
                    self.used.push(site.span);
                    let left = self.build(left);
                    let right = self.build(right);
                    return LogicNode::Internal {
                        relation: site.relation,
                        connective: site.connective,
                        connective_span: site.span,
                        span: region,
                        left: Box::new(left),
                        right: Box::new(right),
                    };
                }
                None => self.rejected.push(site.span),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_bracketed;

    fn tax() -> Taxonomy {
        Taxonomy::builtin()
    }

    fn words(tree: &ConTree, region: &Region) -> String {
        region.tokens(tree.tokens()).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn finds_conjunction_at_cc() {
        let t = parse_bracketed("(S (S (NNS dogs) (VBP bark)) (CC and) (S (NNS cats) (VBP meow)))").unwrap();
        let site = find_first_match(&t, &Region::from_span(t.span()), &tax(), &[]).unwrap();
        assert_eq!(site.connective, "and");
        assert_eq!(site.relation, RelationType::Conjunction);
        assert_eq!(t.node(site.node).label, "CC");
        let (l, r) = extract_arguments(&t, &site).unwrap();
        assert_eq!(words(&t, &l), "dogs bark");
        assert_eq!(words(&t, &r), "cats meow");
    }

    #[test]
    fn no_connective_no_match() {
        let t = parse_bracketed("(S (NNS dogs) (VBP bark))").unwrap();
        assert!(find_first_match(&t, &Region::from_span(t.span()), &tax(), &[]).is_none());
        let lt = build_logic_tree(&[t], &tax());
        assert_eq!(
            lt.root,
            LogicNode::Leaf {
                span: Region::from_span(Span::new(0, 2)),
                text: "dogs bark".into()
            }
        );
    }

    #[test]
    fn even_when_phrase_beats_inner_when() {
        // 7 nodes: S, SBAR, X, RB even, WRB when, S2 ..., NP
        let t = parse_bracketed("(S (SBAR (X (RB even) (WRB when)) (S it rains)) (NP we walk))").unwrap();
        let site = find_first_match(&t, &Region::from_span(t.span()), &tax(), &[]).unwrap();
        assert_eq!(site.connective, "even when");
        assert_eq!(site.relation, RelationType::Concession);
        assert_eq!(site.span, Span::new(0, 2));
    }

    #[test]
    fn sentence_initial_condition_uses_grandparent() {
        let t = parse_bracketed("(S (SBAR (IN If) (S you loved me)) (, ,) (S you 'd never criticize me))").unwrap();
        let site = find_first_match(&t, &Region::from_span(t.span()), &tax(), &[]).unwrap();
        assert_eq!(site.connective, "if");
        let (l, r) = extract_arguments(&t, &site).unwrap();
        assert_eq!(words(&t, &l), "you 'd never criticize me");
        assert_eq!(words(&t, &r), "you loved me");
    }

    #[test]
    fn sentence_final_connective_mirrors_rule() {
        let t = parse_bracketed("(S (S (NP we) (VP (VBD ate) (ADVP (RB then)))) (S (NP they) (VP left)))").unwrap();
        let site = find_first_match(&t, &Region::from_span(t.span()), &tax(), &[]).unwrap();
        assert_eq!(site.connective, "then");
        let (l, r) = extract_arguments(&t, &site).unwrap();
        assert_eq!(words(&t, &l), "ate");
        assert_eq!(words(&t, &r), "we");
    }

    #[test]
    fn bare_connective_has_no_arguments() {
        let t = parse_bracketed("(ADVP (RB therefore))").unwrap();
        let site = find_first_match(&t, &Region::from_span(t.span()), &tax(), &[]).unwrap();
        assert!(extract_arguments(&t, &site).is_none());
        let lt = build_logic_tree(&[t], &tax());
        assert!(lt.root.is_leaf());
        assert_eq!(lt.rejected, vec![Span::new(0, 1)]);
    }

    #[test]
    fn consumed_spans_are_skipped() {
        let t = parse_bracketed("(S (S a) (CC and) (S b) (CC or) (S c))").unwrap();
        let within = Region::from_span(t.span());
        let site = find_first_match(&t, &within, &tax(), &[Span::new(1, 2)]).unwrap();
        assert_eq!(site.connective, "or");
    }

    #[test]
    fn non_contiguous_remainder_is_concatenated() {
        // G = S has tokens before and after P = SBAR.
        let t = parse_bracketed("(S (NP we) (SBAR (IN because) (S it rained)) (VP stayed home))").unwrap();
        let site = find_first_match(&t, &Region::from_span(t.span()), &tax(), &[]).unwrap();
        let (l, r) = extract_arguments(&t, &site).unwrap();
        assert_eq!(l.spans().len(), 2);
        assert_eq!(words(&t, &l), "we stayed home");
        assert_eq!(words(&t, &r), "it rained");
    }

    #[test]
    fn recursion_nests_relations() {
        let t = parse_bracketed(
            "(S (S (S (NP we) (VP ran)) (CC and) (S (NP they) (VP hid))) (, ,) (CC but) (S (NP nobody) (VP came)))",
        )
        .unwrap();
        let lt = build_logic_tree(&[t], &tax());
        let rels: Vec<_> = lt.relations().into_iter().map(|(r, c)| (r, c.to_string())).collect();
        assert_eq!(
            rels,
            vec![
                (RelationType::Contrast, "but".to_string()),
                (RelationType::Conjunction, "and".to_string())
            ]
        );
        assert_eq!(lt.depth(), 3);
    }

    #[test]
    fn serialization_round_trips() {
        let t = parse_bracketed("(S (S (NNS dogs) (VBP bark)) (CC and) (S (NNS cats) (VBP meow)))").unwrap();
        let lt = build_logic_tree(&[t], &tax());
        let json = serde_json::to_string(&lt).unwrap();
        assert!(json.contains("\"relation\":\"conjunction\""));
        let back: LogicTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, lt);
    }

    #[test]
    fn punctuation_detection() {
        assert!(is_punctuation(","));
        assert!(is_punctuation("..."));
        assert!(is_punctuation("\u{201C}"));
        assert!(!is_punctuation("'d"));
        assert!(!is_punctuation("n't"));
        assert!(!is_punctuation(""));
    }
}
