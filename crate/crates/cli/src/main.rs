use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fallacy_tree_cli::{
    cmd_build, cmd_encode, cmd_eval, cmd_stats, cmd_synth, cmd_textualize, cmd_zeroshot, BuildArgs, EncodeArgs,
    EvalArgs, Outcome, StatsArgs, SynthArgs, TextualizeArgs, ZeroshotArgs,
};

/// Logical structure trees for fallacy detection and classification.
#[derive(Parser)]
#[command(name = "fallacy-tree", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build logic trees from constituency trees.
    Build(BuildArgs),
    /// Flatten logic trees into triplet tables and prompts.
    Textualize(TextualizeArgs),
    /// Per-class relation presence table.
    Stats(StatsArgs),
    /// Embed logic trees and project them into soft prompts.
    Encode(EncodeArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Zero-shot detection or classification through a chat endpoint.
    Zeroshot(ZeroshotArgs),
    /// Generate a synthetic statement corpus.
    Synth(SynthArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Textualize(a) => cmd_textualize(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Zeroshot(a) => cmd_zeroshot(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(outcome) => report(&outcome),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn report(outcome: &Outcome) -> ExitCode {
    println!(
        "{} records, {} failed, {} with fallbacks -> {}",
        outcome.records,
        outcome.fatal,
        outcome.soft,
        outcome.out_dir.display()
    );
    println!("{}", outcome.summary);
    if outcome.success() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
