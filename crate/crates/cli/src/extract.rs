use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use relnet::annotate::{build_corpus, read_conllu_dir, save_corpus, AliasMap, AntonymLexicon};

use crate::manifest::RunManifest;

#[derive(clap::Args)]
pub struct Args {
    /// Directory of `*.conllu` files.
    #[arg(long)]
    conllu: PathBuf,
    /// TSV of `entity<TAB>alias`.
    #[arg(long)]
    aliases: PathBuf,
    /// TSV of `verb<TAB>antonym`.
    #[arg(long)]
    antonyms: PathBuf,
    /// Entities to keep (comma separated); all by default.
    #[arg(long, value_delimiter = ',')]
    entities: Vec<String>,
    /// Output corpus (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let aliases = AliasMap::load(&args.aliases)
        .with_context(|| format!("reading aliases {}", args.aliases.display()))?;
    let antonyms = AntonymLexicon::load(&args.antonyms)
        .with_context(|| format!("reading antonyms {}", args.antonyms.display()))?;
    let sentences = read_conllu_dir(&args.conllu)
        .with_context(|| format!("reading {}", args.conllu.display()))?;
    if sentences.is_empty() {
        bail!(relnet::Error::Input(format!(
            "no sentences in {}",
            args.conllu.display()
        )));
    }
    let by_pair = build_corpus(sentences, &aliases, &antonyms, &args.entities)?;
    let corpus: Vec<_> = by_pair.into_values().flatten().collect();
    save_corpus(&args.out, &corpus)?;

    let mut m = RunManifest::new("extract", None, serde_json::json!({ "entities": args.entities }))?;
    m.input("conllu", &args.conllu)?;
    m.input("aliases", &args.aliases)?;
    m.input("antonyms", &args.antonyms)?;
    m.write_beside(&args.out)?;
    log::info!("wrote {} articles to {}", corpus.len(), args.out.display());
    Ok(())
}
