//! Logical structure trees for fallacy reasoning.
//!
//! The pipeline reads bracketed constituency parses, anchors connective
//! phrases from a ten-relation taxonomy, and builds a binary tree whose
//! internal nodes are relations and whose leaves are argument spans. Trees
//! can be flattened into prompt tables, embedded with relation-specific
//! linear encoders, counted for corpus statistics, and used to drive
//! zero-shot fallacy detection and classification against a chat-completion
//! endpoint.

pub mod corpus;
pub mod corpus_stats;
pub mod eval_metrics;
pub mod llm_gateway;
pub mod logic_tree;
pub mod span;
pub mod syntax;
pub mod taxonomy;
pub mod textualizer;
pub mod tree_encoder;

pub use eval_metrics::{
    classification_metrics, detection_metrics, unify_label, DetectionLabel, LabelMap, MetricsReport,
};
pub use logic_tree::{build_logic_tree, LogicNode, LogicTree};
pub use span::{Region, Span};
pub use syntax::{parse_bracketed, ConTree};
pub use taxonomy::{load_taxonomy, RelationType, Taxonomy};
pub use textualizer::{
    build_classification_prompt, build_detection_prompt, render_table, to_triplets, Dataset, FallacyCatalog,
    TripletTable,
};
