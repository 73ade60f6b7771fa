//! `relnet`: extract entity-pair articles from parsed text, train relation
//! embeddings, and analyse how relations change over time.

mod analyze;
mod extract;
mod manifest;
mod output;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit statuses.
pub mod exit {
    pub const INPUT: u8 = 2;
    pub const NUMERIC: u8 = 3;
    pub const MISSING_ARTIFACT: u8 = 4;
}

/// A required artifact (such as a checkpoint) that does not exist.
#[derive(Debug, thiserror::Error)]
#[error("missing artifact: {0}")]
pub struct MissingArtifact(pub PathBuf);

#[derive(Parser)]
#[command(name = "relnet", version, about = "Interpretable relation embeddings over time")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus of entity-pair articles from CoNLL-U parses.
    Extract(extract::Args),
    /// Train a model on a corpus.
    Train(train::Args),
    /// Run an analysis on a trained model.
    #[command(subcommand)]
    Analyze(analyze::Command),
    /// Generate a synthetic corpus, embeddings and ground truth.
    Synth(synth::Args),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<MissingArtifact>().is_some() {
            return exit::MISSING_ARTIFACT;
        }
        if let Some(e) = cause.downcast_ref::<relnet::Error>() {
            return match e {
                relnet::Error::NonFinite { .. } | relnet::Error::Undefined(_) => exit::NUMERIC,
                _ => exit::INPUT,
            };
        }
    }
    exit::INPUT
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => extract::run(a),
        Command::Train(a) => train::run(a),
        Command::Analyze(c) => analyze::run(c),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
