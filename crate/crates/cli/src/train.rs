use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use relnet::annotate::{load_corpus, month_count};
use relnet::model::{Checkpoint, Model, ModelConfig, RmnConfig};
use relnet::training::{train_rmn_with, train_with, EpochLog, TrainConfig};
use relnet::EmbeddingTable;
use serde::Serialize;

use crate::manifest::RunManifest;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Attention model over predicates, entities and nouns.
    Larn,
    /// Recurrent averaging baseline.
    Rmn,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    corpus: PathBuf,
    /// Word vectors in text format.
    #[arg(long)]
    embeddings: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch loss log (JSON lines); defaults to `<out>.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "larn")]
    model: ModelKind,
    /// Number of relations K.
    #[arg(long, default_value_t = 30)]
    relations: usize,
    #[arg(long, default_value_t = 50)]
    entity_dim: usize,
    #[arg(long, default_value_t = 300)]
    final_dim: usize,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 15)]
    negatives: usize,
    /// Weight of the orthogonality penalty.
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    /// Predicate dropout probability.
    #[arg(long, default_value_t = 0.5)]
    dropout: f64,
    /// Baseline only: weight on the previous distribution.
    #[arg(long, default_value_t = 0.5)]
    recurrence: f64,
    /// Baseline only: most frequent words removed from the input.
    #[arg(long, default_value_t = 500)]
    drop_most_frequent: usize,
    /// Baseline only: least frequent words removed from the input.
    #[arg(long, default_value_t = 5000)]
    drop_least_frequent: usize,
    #[arg(long, env = "RELNET_SEED", default_value_t = 0)]
    seed: u64,
}

impl Args {
    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            negatives: self.negatives,
            lambda: self.lambda,
            dropout: self.dropout,
            seed: self.seed,
        }
    }
}

#[derive(Serialize)]
struct Snapshot<'a> {
    model: ModelKind,
    train: &'a TrainConfig,
    larn: Option<&'a ModelConfig>,
    rmn: Option<&'a RmnConfig>,
}

pub fn run(args: Args) -> Result<()> {
    let corpus = load_corpus(&args.corpus)
        .with_context(|| format!("reading corpus {}", args.corpus.display()))?;
    let emb = EmbeddingTable::load(&args.embeddings)
        .with_context(|| format!("reading embeddings {}", args.embeddings.display()))?;
    let cfg = args.train_config();
    let d = emb.dim();
    let months = month_count(&corpus);
    let larn = ModelConfig {
        relations: args.relations,
        word_dim: d,
        entity_dim: args.entity_dim,
        months,
        attention_dim: d + months,
        final_dim: args.final_dim,
    };
    let rmn = RmnConfig {
        relations: args.relations,
        word_dim: d,
        entity_dim: args.entity_dim,
        recurrence: args.recurrence,
        drop_most_frequent: args.drop_most_frequent,
        drop_least_frequent: args.drop_least_frequent,
    };
    let snapshot = match args.model {
        ModelKind::Larn => Snapshot { model: args.model, train: &cfg, larn: Some(&larn), rmn: None },
        ModelKind::Rmn => Snapshot { model: args.model, train: &cfg, larn: None, rmn: Some(&rmn) },
    };
    let mut manifest = RunManifest::new("train", Some(args.seed), &snapshot)?;
    manifest.input("corpus", &args.corpus)?;
    manifest.input("embeddings", &args.embeddings)?;

    let log_path = args.log.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".log.jsonl");
        p.into()
    });
    let mut log_file = std::io::BufWriter::new(fs::File::create(&log_path)?);
    let mut write_err = None;
    let mut on_epoch = |e: &EpochLog| {
        let r = serde_json::to_writer(&mut log_file, e)
            .map_err(anyhow::Error::from)
            .and_then(|_| log_file.write_all(b"\n").map_err(Into::into));
        if let Err(e) = r {
            write_err.get_or_insert(e);
        }
    };
    let model = match args.model {
        ModelKind::Larn => Model::Larn(train_with(&corpus, larn, &cfg, &emb, &mut on_epoch)?.params),
        ModelKind::Rmn => Model::Rmn(train_rmn_with(&corpus, rmn, &cfg, &emb, &mut on_epoch)?.params),
    };
    if let Some(e) = write_err {
        return Err(e.context(format!("writing {}", log_path.display())));
    }
    log_file.flush()?;

    let hash = manifest.hash();
    let ckpt = Checkpoint::new(model, hash);
    fs::write(&args.out, ckpt.to_json()? + "\n")?;
    manifest.write_beside(&args.out)?;
    log::info!("wrote checkpoint {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[derive(Parser)]
    struct Wrap {
        #[command(flatten)]
        args: Args,
    }

    #[test]
    fn defaults_match_reference_hyperparameters() {
        let w = Wrap::try_parse_from(["t", "--corpus", "c", "--embeddings", "e", "--out", "o"]).unwrap();
        let a = w.args;
        assert_eq!(a.relations, 30);
        assert_eq!(a.epochs, 15);
        assert_eq!(a.learning_rate, 1e-3);
        assert_eq!(a.batch_size, 256);
        assert_eq!(a.negatives, 15);
        assert_eq!(a.lambda, 0.1);
        assert_eq!(a.dropout, 0.5);
        assert_eq!(a.entity_dim, 50);
        assert_eq!(a.final_dim, 300);
        assert_eq!(a.train_config(), TrainConfig { seed: a.seed, ..TrainConfig::default() });
    }
}
