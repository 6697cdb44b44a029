//! Batch command-line surface over `fallacy-tree-core`.

pub mod commands;
pub mod manifest;
pub mod synth;

pub use commands::{
    cmd_build, cmd_encode, cmd_eval, cmd_stats, cmd_synth, cmd_textualize, cmd_zeroshot, BuildArgs, CommonArgs,
    EncodeArgs, EvalArgs, StatsArgs, SynthArgs, Task, TextualizeArgs, TreeSource, ZeroshotArgs,
};
pub use manifest::{Outcome, RunManifest};
