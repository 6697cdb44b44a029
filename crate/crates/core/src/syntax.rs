//! Bracketed constituency trees.
//!
//! Trees are stored as an arena of nodes with parent links and token spans.
//! A parenthesized `(TAG word)` is a leaf; bare words inside a phrase, as in
//! `(S you loved me)`, become unlabeled leaves.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::span::{Region, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub label: String,
    pub children: Vec<NodeId>,
    pub token: Option<String>,
    pub span: Span,
    pub parent: Option<NodeId>,
    pub depth: usize,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.token.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConTree {
    nodes: Vec<Node>,
    tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ParseError {
            offset,
            message: message.into(),
        }
    }
}

const ESCAPES: [(&str, &str); 6] = [
    ("-LRB-", "("),
    ("-RRB-", ")"),
    ("-LSB-", "["),
    ("-RSB-", "]"),
    ("-LCB-", "{"),
    ("-RCB-", "}"),
];

fn decode_token(raw: &str) -> String {
    ESCAPES
        .iter()
        .find(|(esc, _)| *esc == raw)
        .map(|(_, plain)| plain.to_string())
        .unwrap_or_else(|| raw.to_string())
}

fn encode_token(token: &str) -> &str {
    ESCAPES
        .iter()
        .find(|(_, plain)| *plain == token)
        .map(|(esc, _)| *esc)
        .unwrap_or(token)
}

/// Parses one bracketed tree. Trailing non-whitespace input is an error.
pub fn parse_bracketed(text: &str) -> Result<ConTree, ParseError> {
    let mut parser = Parser {
        src: text,
        pos: 0,
        nodes: Vec::new(),
        tokens: Vec::new(),
    };
    parser.skip_ws();
    if parser.pos >= text.len() {
        return Err(ParseError::new(0, "empty input"));
    }
    let root = parser.tree(None, 0)?;
    debug_assert_eq!(root, NodeId(0));
    parser.skip_ws();
    if parser.pos < text.len() {
        return Err(ParseError::new(parser.pos, "unexpected input after tree"));
    }
    Ok(ConTree {
        nodes: parser.nodes,
        tokens: parser.tokens,
    })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    nodes: Vec<Node>,
    tokens: Vec<String>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn atom(&mut self) -> &str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn push(&mut self, label: String, parent: Option<NodeId>, depth: usize) -> NodeId {
        let id = NodeId(self.nodes.len());
        let at = self.tokens.len();
        self.nodes.push(Node {
            label,
            children: Vec::new(),
            token: None,
            span: Span::new(at, at),
            parent,
            depth,
        });
        id
    }

    fn leaf(&mut self, label: String, raw: &str, parent: Option<NodeId>, depth: usize) -> NodeId {
        let id = self.push(label, parent, depth);
        let token = decode_token(raw);
        self.tokens.push(token.clone());
        let node = &mut self.nodes[id.0];
        node.token = Some(token);
        node.span.end += 1;
        id
    }

    fn tree(&mut self, parent: Option<NodeId>, depth: usize) -> Result<NodeId, ParseError> {
        let open = self.pos;
        if self.peek() != Some('(') {
            return Err(ParseError::new(self.pos, "expected `(`"));
        }
        self.pos += 1;
        self.skip_ws();
        let label = match self.peek() {
            Some('(') => String::new(),
            Some(')') => return Err(ParseError::new(self.pos, "node without label or children")),
            None => return Err(ParseError::new(self.pos, "unbalanced brackets: unexpected end of input")),
            Some(_) => self.atom().to_string(),
        };
        self.skip_ws();

        // `(TAG word)` is a leaf.
        if !matches!(self.peek(), Some('(') | Some(')') | None) {
            let save = self.pos;
            let word = self.atom().to_string();
            self.skip_ws();
            if self.peek() == Some(')') {
                self.pos += 1;
                return Ok(self.leaf(label, &word, parent, depth));
            }
            self.pos = save;
        }

        let id = self.push(label, parent, depth);
        loop {
            self.skip_ws();
            match self.peek() {
                None => {
                    return Err(ParseError::new(
                        self.src.len(),
                        format!("unbalanced brackets: node opened at offset {open} is never closed"),
                    ))
                }
                Some(')') => {
                    if self.nodes[id.0].children.is_empty() {
                        return Err(ParseError::new(self.pos, "internal node with no children"));
                    }
                    self.pos += 1;
                    break;
                }
                Some('(') => {
                    let child = self.tree(Some(id), depth + 1)?;
                    self.nodes[id.0].children.push(child);
                }
                Some(_) => {
                    let word = self.atom().to_string();
                    let child = self.leaf(String::new(), &word, Some(id), depth + 1);
                    self.nodes[id.0].children.push(child);
                }
            }
        }
        self.nodes[id.0].span.end = self.tokens.len();
        Ok(id)
    }
}

impl ConTree {
    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i), n))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf tokens of the whole tree.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn span(&self) -> Span {
        self.nodes[0].span
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    /// Tokens covered by `id`, in order.
    pub fn leaf_text(&self, id: NodeId) -> &[String] {
        let span = self.nodes[id.0].span;
        &self.tokens[span.start..span.end]
    }

    /// Breadth-first order below `id`, optionally keeping only nodes whose
    /// span lies inside `within`.
    pub fn level_order(&self, id: NodeId, within: Option<Span>) -> Vec<NodeId> {
        match within {
            Some(span) => self.level_order_in(id, &Region::from_span(span)),
            None => self.bfs(id).collect(),
        }
    }

    /// Breadth-first order below `id`, restricted to nodes lying inside one
    /// piece of `within`.
    pub fn level_order_in(&self, id: NodeId, within: &Region) -> Vec<NodeId> {
        self.bfs(id)
            .filter(|n| within.contains_span(self.nodes[n.0].span))
            .collect()
    }

    fn bfs(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        let mut queue = VecDeque::from([id]);
        std::iter::from_fn(move || {
            let next = queue.pop_front()?;
            queue.extend(self.nodes[next.0].children.iter().copied());
            Some(next)
        })
    }

    /// Nearest proper ancestor whose span is strictly larger than `span`,
    /// skipping unary projections.
    pub fn growing_ancestor(&self, id: NodeId, span: Span) -> Option<NodeId> {
        let mut cur = self.nodes[id.0].parent;
        while let Some(p) = cur {
            if self.nodes[p.0].span.len() > span.len() {
                return Some(p);
            }
            cur = self.nodes[p.0].parent;
        }
        None
    }

    /// Places `trees` side by side under a new root labelled `label`,
    /// shifting spans into one token index space.
    pub fn wrap(label: &str, trees: &[ConTree]) -> ConTree {
        let mut nodes = vec![Node {
            label: label.to_string(),
            children: Vec::new(),
            token: None,
            span: Span::new(0, 0),
            parent: None,
            depth: 0,
        }];
        let mut tokens = Vec::new();
        for tree in trees {
            let node_offset = nodes.len();
            let tok_offset = tokens.len();
            nodes[0].children.push(NodeId(node_offset));
            for node in &tree.nodes {
                nodes.push(Node {
                    label: node.label.clone(),
                    children: node.children.iter().map(|c| NodeId(c.0 + node_offset)).collect(),
                    token: node.token.clone(),
                    span: Span::new(node.span.start + tok_offset, node.span.end + tok_offset),
                    parent: Some(node.parent.map_or(NodeId(0), |p| NodeId(p.0 + node_offset))),
                    depth: node.depth + 1,
                });
            }
            tokens.extend(tree.tokens.iter().cloned());
        }
        nodes[0].span = Span::new(0, tokens.len());
        ConTree { nodes, tokens }
    }

    /// Bracketed rendering; re-parses to an identical tree.
    pub fn to_bracketed(&self) -> String {
        let mut out = String::new();
        self.render(self.root(), &mut out);
        out
    }

    fn render(&self, id: NodeId, out: &mut String) {
        let node = &self.nodes[id.0];
        if let Some(token) = &node.token {
            if node.label.is_empty() {
                out.push_str(encode_token(token));
            } else {
                out.push('(');
                out.push_str(&node.label);
                out.push(' ');
                out.push_str(encode_token(token));
                out.push(')');
            }
            return;
        }
        out.push('(');
        out.push_str(&node.label);
        for child in &node.children {
            out.push(' ');
            self.render(*child, out);
        }
        out.push(')');
    }
}

impl fmt::Display for ConTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bracketed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(tree: &ConTree, ids: &[NodeId]) -> Vec<String> {
        ids.iter()
            .map(|id| {
                let n = tree.node(*id);
                n.token.clone().unwrap_or_else(|| n.label.clone())
            })
            .collect()
    }

    #[test]
    fn parses_simple_tree() {
        let t = parse_bracketed("(S (NP (PRP I)) (VP (VBP run)))").unwrap();
        assert_eq!(t.tokens(), &["I", "run"]);
        assert_eq!(t.span(), Span::new(0, 2));
        assert_eq!(t.leaf_text(t.root()), &["I", "run"]);
        assert_eq!(t.node(t.root()).label, "S");
    }

    #[test]
    fn root_label_and_vp_text() {
        let t = parse_bracketed("(ROOT (S (NP (NNS dogs)) (VP (VBP bark))))").unwrap();
        assert_eq!(t.node(t.root()).label, "ROOT");
        assert_eq!(t.tokens(), &["dogs", "bark"]);
        let vp = t.nodes().find(|(_, n)| n.label == "VP").unwrap().0;
        assert_eq!(t.leaf_text(vp), &["bark"]);
        let leaf = t.nodes().find(|(_, n)| n.is_leaf()).unwrap().0;
        assert_eq!(t.leaf_text(leaf), &["dogs"]);
    }

    #[test]
    fn bare_words_become_leaves() {
        let t = parse_bracketed("(S (SBAR (IN If) (S you loved me)) (, ,) (S you 'd never criticize me))").unwrap();
        assert_eq!(t.tokens().len(), 10);
        assert_eq!(t.tokens()[5], "you");
        assert_eq!(t.tokens()[6], "'d");
    }

    #[test]
    fn errors_carry_offsets() {
        let err = parse_bracketed("(S (NP (PRP I))").unwrap_err();
        assert!(err.message.contains("unbalanced"), "{err}");
        assert_eq!(parse_bracketed("   ").unwrap_err().message, "empty input");
        assert!(parse_bracketed("(S (NP ))").is_err());
        assert!(parse_bracketed("(S)").is_err());
        assert!(parse_bracketed("()").is_err());
        let err = parse_bracketed("(S a) b").unwrap_err();
        assert_eq!(err.offset, 6);
        assert!(parse_bracketed("dogs").is_err());
    }

    #[test]
    fn escapes_are_decoded_and_rendered_back() {
        let t = parse_bracketed("(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))").unwrap();
        assert_eq!(t.tokens(), &["(", "x", ")"]);
        assert_eq!(t.to_bracketed(), "(NP (-LRB- -LRB-) (NN x) (-RRB- -RRB-))");
    }

    #[test]
    fn empty_outer_label() {
        let t = parse_bracketed("( (S (NN a) (NN b)))").unwrap();
        assert_eq!(t.node(t.root()).label, "");
        assert_eq!(parse_bracketed(&t.to_bracketed()).unwrap(), t);
    }

    #[test]
    fn level_order_two_leaves() {
        let t = parse_bracketed("(S (A x) (B y))").unwrap();
        let order = t.level_order(t.root(), None);
        assert_eq!(labels(&t, &order), ["S", "x", "y"]);
        let within = t.level_order(t.root(), Some(Span::new(1, 2)));
        assert_eq!(labels(&t, &within), ["y"]);
    }

    #[test]
    fn level_order_is_breadth_first() {
        // S -> L(A(a) ...) and R(b): R is shallower than A, so it comes first.
        let t = parse_bracketed("(S (L (A a) (C c)) (R b))").unwrap();
        let order = t.level_order(t.root(), None);
        assert_eq!(labels(&t, &order), ["S", "L", "b", "a", "c"]);
    }

    #[test]
    fn wrap_offsets_spans() {
        let a = parse_bracketed("(S (NN a) (NN b))").unwrap();
        let b = parse_bracketed("(S (NN c))").unwrap();
        let w = ConTree::wrap("DOC", &[a, b]);
        assert_eq!(w.tokens(), &["a", "b", "c"]);
        let second = w.node(w.root()).children[1];
        assert_eq!(w.node(second).span, Span::new(2, 3));
        assert_eq!(w.leaf_text(second), &["c"]);
        assert_eq!(parse_bracketed(&w.to_bracketed()).unwrap(), w);
    }

    #[test]
    fn growing_ancestor_skips_unary() {
        let t = parse_bracketed("(S (ADVP (RB however)) (NP it))").unwrap();
        let rb = t.nodes().find(|(_, n)| n.label == "RB").unwrap().0;
        let anc = t.growing_ancestor(rb, t.node(rb).span).unwrap();
        assert_eq!(t.node(anc).label, "S");
    }
}
