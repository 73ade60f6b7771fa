use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use relnet::annotate::save_corpus;
use relnet::synth::{generate, SynthSpec};

use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    /// Generator specification (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Receives `corpus.jsonl`, `embeddings.txt` and `truth.json`.
    #[arg(long)]
    out_dir: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long, env = "RELNET_SEED")]
    seed: Option<u64>,
}

pub fn run(args: Args) -> Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading spec {}", args.spec.display()))?;
    let mut spec: SynthSpec = serde_json::from_str(&text)
        .map_err(relnet::Error::from)
        .with_context(|| format!("parsing spec {}", args.spec.display()))?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out = generate(&spec)?;
    fs::create_dir_all(&args.out_dir)?;
    let corpus = args.out_dir.join("corpus.jsonl");
    save_corpus(&corpus, &out.corpus)?;
    out.embeddings.save(&args.out_dir.join("embeddings.txt"))?;
    fs::write(
        args.out_dir.join("truth.json"),
        serde_json::to_string_pretty(&out.truth)? + "\n",
    )?;
    let manifest = RunManifest::new("synth", Some(spec.seed), &spec)?;
    manifest.write_beside(&corpus)?;
    log::info!(
        "wrote {} articles and {} embeddings to {}",
        out.corpus.len(),
        out.embeddings.len(),
        args.out_dir.display()
    );
    Ok(())
}
