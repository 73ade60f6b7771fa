use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use relnet::analysis::{
    context_words, descriptors, key_event_alignment, load_key_events, macro_alignment,
    regional_diff, tf_baseline_trend, trend, Alignment, ChangeRateReport, DescriptorSet,
    KeyEvent, TrendSeries, DEFAULT_TOP_FRACTION,
};
use relnet::annotate::{group_by_pair, load_corpus, month_labels, AnnotatedArticle};
use relnet::embeddings::top_k_predicates;
use relnet::model::{Checkpoint, Model, RelationDistribution};
use relnet::{EmbeddingTable, EntityPair};
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::output::{fmt_f, fmt_opt, Table};
use crate::MissingArtifact;

#[derive(clap::Args)]
pub struct Inputs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Write the table as CSV here (a markdown table always goes to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Subcommand)]
pub enum Command {
    /// Nearest predicates of each relation and its average weight.
    Descriptors {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        /// Only the most frequent predicates are candidates.
        #[arg(long, default_value_t = 500)]
        vocab_limit: usize,
    },
    /// Monthly weights of a pair's most prominent relations.
    Trend {
        #[command(flatten)]
        inputs: Inputs,
        /// Entity pair, e.g. `US,China`.
        #[arg(long)]
        pair: EntityPair,
        #[arg(long, default_value_t = 3)]
        top: usize,
        /// Key events (TSV) to mark in the output.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        vocab_limit: usize,
    },
    /// Monthly change rate of the top three relations.
    ChangeRate {
        #[command(flatten)]
        inputs: Inputs,
        /// Restrict to one pair; all pairs by default.
        #[arg(long)]
        pair: Option<EntityPair>,
        #[arg(long, default_value_t = 6)]
        window: usize,
        #[arg(long)]
        events: Option<PathBuf>,
        /// Write the full report as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Words attended to in articles dominated by one relation.
    Context {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        pair: EntityPair,
        #[arg(long)]
        relation: usize,
        #[arg(long, default_value_t = DEFAULT_TOP_FRACTION)]
        top_fraction: f64,
    },
    /// Relation weights compared between two source regions.
    Regional {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        pair: EntityPair,
        /// Two regions, e.g. `US,SG`; the two largest by default.
        #[arg(long, value_delimiter = ',')]
        regions: Option<Vec<String>>,
        #[arg(long, default_value_t = 500)]
        vocab_limit: usize,
    },
    /// Term-frequency trend of predicates, with its change rate.
    TfBaseline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        pair: EntityPair,
        #[arg(long, default_value_t = 6)]
        window: usize,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

struct Loaded {
    model: Model,
    corpus: Vec<AnnotatedArticle>,
    emb: EmbeddingTable,
    dists: Vec<Option<RelationDistribution>>,
    manifest: RunManifest,
}

impl Inputs {
    fn load(&self, command: &str, config: impl Serialize) -> Result<Loaded> {
        if !self.checkpoint.is_file() {
            return Err(MissingArtifact(self.checkpoint.clone()).into());
        }
        let text = fs::read_to_string(&self.checkpoint)?;
        let ckpt = Checkpoint::from_json(&text)
            .with_context(|| format!("reading checkpoint {}", self.checkpoint.display()))?;
        let corpus = load_corpus(&self.corpus)
            .with_context(|| format!("reading corpus {}", self.corpus.display()))?;
        let emb = EmbeddingTable::load(&self.embeddings)
            .with_context(|| format!("reading embeddings {}", self.embeddings.display()))?;
        let dists = ckpt.model.infer(&corpus, &emb)?;
        let mut manifest = RunManifest::new(command, None, config)?;
        manifest.input("checkpoint", &self.checkpoint)?;
        manifest.input("corpus", &self.corpus)?;
        manifest.input("embeddings", &self.embeddings)?;
        Ok(Loaded {
            model: ckpt.model,
            corpus,
            emb,
            dists,
            manifest,
        })
    }
}

impl Loaded {
    fn descriptors(&self, vocab_limit: usize, top_k: usize) -> Result<DescriptorSet> {
        let vocab = top_k_predicates(&self.corpus, &self.emb, vocab_limit);
        Ok(descriptors(
            self.model.relations(),
            &vocab,
            &self.emb,
            &self.corpus,
            &self.dists,
            top_k,
        )?)
    }
}

fn emit(table: &Table, out: Option<&Path>, manifest: &RunManifest) -> Result<()> {
    print!("{}", table.to_markdown());
    if let Some(path) = out {
        table.write_csv(path, &manifest.hash())?;
        manifest.write_beside(path)?;
    }
    Ok(())
}

fn load_events(path: Option<&Path>) -> Result<Vec<KeyEvent>> {
    match path {
        Some(p) => load_key_events(p).with_context(|| format!("reading events {}", p.display())),
        None => Ok(Vec::new()),
    }
}

/// Month indices of the pair's events; events outside the corpus are skipped.
fn event_months(events: &[KeyEvent], pair: &EntityPair, labels: &[String]) -> BTreeSet<usize> {
    events
        .iter()
        .filter(|e| &e.pair == pair)
        .filter_map(|e| {
            let label = e.month.to_string();
            let idx = labels.iter().position(|l| *l == label);
            if idx.is_none() {
                log::warn!("event {} {} is outside the corpus months", pair, label);
            }
            idx
        })
        .collect()
}

#[derive(Serialize)]
struct PairReport<'a> {
    pair: &'a EntityPair,
    report: &'a ChangeRateReport,
    argmax_month: Option<String>,
    key_months: Vec<String>,
    alignment: Option<Alignment>,
}

#[derive(Serialize)]
struct FullReport<'a> {
    manifest_sha256: String,
    window: usize,
    pairs: Vec<PairReport<'a>>,
    macro_alignment: Option<Alignment>,
}

fn change_rate_table(
    series: &[(TrendSeries, ChangeRateReport)],
    events: &[KeyEvent],
    labels: &[String],
    window: usize,
    manifest: &RunManifest,
    out: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let mut table = Table::new(["pair", "month", "delta", "is_key_event"]);
    let mut pairs = Vec::new();
    for (s, r) in series {
        let keys = event_months(events, &s.pair, labels);
        for (t, d) in r.delta.iter().enumerate() {
            table.push(vec![
                s.pair.to_string(),
                labels[t].clone(),
                fmt_opt(*d),
                keys.contains(&t).to_string(),
            ]);
        }
        let alignment = if keys.is_empty() {
            None
        } else {
            match key_event_alignment(r, &keys) {
                Ok(a) => Some(a),
                Err(e) => {
                    log::warn!("{}: {e}", s.pair);
                    None
                }
            }
        };
        pairs.push(PairReport {
            pair: &s.pair,
            report: r,
            argmax_month: r.argmax().map(|t| labels[t].clone()),
            key_months: keys.iter().map(|&t| labels[t].clone()).collect(),
            alignment,
        });
    }
    emit(&table, out, manifest)?;
    let aligned: Vec<Alignment> = pairs.iter().filter_map(|p| p.alignment).collect();
    let macro_alignment = if aligned.is_empty() {
        None
    } else {
        Some(macro_alignment(&aligned)?)
    };
    println!();
    for p in &pairs {
        print!("{}: peak {}", p.pair, p.argmax_month.as_deref().unwrap_or("-"));
        if let Some(a) = p.alignment {
            print!(
                ", key mean {}, other mean {}, relative difference {:+.1}%",
                fmt_f(a.key_mean),
                fmt_f(a.other_mean),
                100.0 * a.relative_difference
            );
        }
        println!();
    }
    if let Some(m) = macro_alignment {
        println!("macro relative difference: {:+.1}%", 100.0 * m.relative_difference);
    }
    if let Some(path) = report_path {
        let full = FullReport {
            manifest_sha256: manifest.hash(),
            window,
            pairs,
            macro_alignment,
        };
        fs::write(path, serde_json::to_string_pretty(&full)? + "\n")?;
    }
    Ok(())
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Descriptors {
            inputs,
            top_k,
            vocab_limit,
        } => {
            let l = inputs.load(
                "analyze descriptors",
                serde_json::json!({ "top_k": top_k, "vocab_limit": vocab_limit }),
            )?;
            let set = l.descriptors(vocab_limit, top_k)?;
            let mut table = Table::new(["relation_id", "avg_weight", "rank", "lemma", "cosine"]);
            for d in set.by_weight() {
                for (rank, (lemma, cos)) in d.neighbours.iter().enumerate() {
                    table.push(vec![
                        d.relation.to_string(),
                        fmt_f(d.avg_weight),
                        (rank + 1).to_string(),
                        lemma.clone(),
                        fmt_f(*cos),
                    ]);
                }
            }
            emit(&table, inputs.out.as_deref(), &l.manifest)
        }
        Command::Trend {
            inputs,
            pair,
            top,
            events,
            vocab_limit,
        } => {
            let l = inputs.load(
                "analyze trend",
                serde_json::json!({ "pair": pair, "top": top, "vocab_limit": vocab_limit }),
            )?;
            let series = trend(&l.corpus, &l.dists, &pair)?;
            let heads = l.descriptors(vocab_limit, 1)?;
            let events = load_events(events.as_deref())?;
            let keys = event_months(&events, &pair, &series.month_labels);
            let mut header = vec![
                "pair",
                "relation_id",
                "descriptor_head",
                "month",
                "mean_weight",
                "n_articles",
            ];
            if !events.is_empty() {
                header.push("is_key_event");
            }
            let mut table = Table::new(header);
            for k in series.top(top) {
                for (t, v) in series.component(k).into_iter().enumerate() {
                    let mut row = vec![
                        pair.to_string(),
                        k.to_string(),
                        heads.head(k).unwrap_or("").to_string(),
                        series.month_labels[t].clone(),
                        fmt_opt(v),
                        series.counts[t].to_string(),
                    ];
                    if !events.is_empty() {
                        row.push(keys.contains(&t).to_string());
                    }
                    table.push(row);
                }
            }
            emit(&table, inputs.out.as_deref(), &l.manifest)
        }
        Command::ChangeRate {
            inputs,
            pair,
            window,
            events,
            report,
        } => {
            let l = inputs.load(
                "analyze change-rate",
                serde_json::json!({ "pair": pair, "window": window }),
            )?;
            let pairs: Vec<EntityPair> = match pair {
                Some(p) => vec![p],
                None => group_by_pair(&l.corpus).into_keys().collect(),
            };
            let mut series = Vec::new();
            for p in &pairs {
                let s = trend(&l.corpus, &l.dists, p)?;
                let r = s.change_rate(window)?;
                series.push((s, r));
            }
            let events = load_events(events.as_deref())?;
            change_rate_table(
                &series,
                &events,
                &month_labels(&l.corpus),
                window,
                &l.manifest,
                inputs.out.as_deref(),
                report.as_deref(),
            )
        }
        Command::Context {
            inputs,
            pair,
            relation,
            top_fraction,
        } => {
            let l = inputs.load(
                "analyze context",
                serde_json::json!({ "pair": pair, "relation": relation, "top_fraction": top_fraction }),
            )?;
            let Model::Larn(params) = &l.model else {
                bail!(relnet::Error::Input(
                    "context words need attention weights; the checkpoint holds the baseline model".into()
                ));
            };
            let c = context_words(&l.corpus, &l.dists, &pair, relation, params, &l.emb, top_fraction)?;
            let mut table = Table::new(["variant", "word", "month", "score"]);
            for m in [&c.attention, &c.frequency, &c.attention_log_frequency] {
                for (r, w) in m.words.iter().enumerate() {
                    for (t, label) in c.month_labels.iter().enumerate() {
                        let s = m.scores[[r, t]];
                        if s != 0.0 {
                            table.push(vec![m.name.clone(), w.clone(), label.clone(), fmt_f(s)]);
                        }
                    }
                }
            }
            if let Some(path) = inputs.out.as_deref() {
                table.write_csv(path, &l.manifest.hash())?;
                l.manifest.write_beside(path)?;
            }
            let mut top = Table::new(["variant", "rank", "word", "total_score", "degenerate"]);
            for m in [&c.attention, &c.frequency, &c.attention_log_frequency] {
                for (i, (w, s)) in m.top.iter().enumerate() {
                    top.push(vec![
                        m.name.clone(),
                        (i + 1).to_string(),
                        w.clone(),
                        fmt_f(*s),
                        m.degenerate.to_string(),
                    ]);
                }
            }
            print!("{}", top.to_markdown());
            Ok(())
        }
        Command::Regional {
            inputs,
            pair,
            regions,
            vocab_limit,
        } => {
            if regions.as_ref().is_some_and(|r| r.len() != 2) {
                bail!(relnet::Error::Config("--regions takes exactly two names".into()));
            }
            let l = inputs.load(
                "analyze regional",
                serde_json::json!({ "pair": pair, "regions": regions, "vocab_limit": vocab_limit }),
            )?;
            let chosen = regions.as_ref().map(|r| (r[0].as_str(), r[1].as_str()));
            let diff = regional_diff(&l.corpus, &l.dists, &pair, chosen)?;
            let heads = l.descriptors(vocab_limit, 1)?;
            let mut table = Table::new(vec![
                "relation_id".to_string(),
                "descriptor_head".to_string(),
                diff.regions[0].clone(),
                diff.regions[1].clone(),
                "difference".to_string(),
            ]);
            for r in &diff.rows {
                table.push(vec![
                    r.relation.to_string(),
                    heads.head(r.relation).unwrap_or("").to_string(),
                    fmt_f(r.weights[0]),
                    fmt_f(r.weights[1]),
                    fmt_f(r.difference),
                ]);
            }
            emit(&table, inputs.out.as_deref(), &l.manifest)
        }
        Command::TfBaseline {
            corpus,
            pair,
            window,
            events,
            out,
        } => {
            let articles = load_corpus(&corpus)
                .with_context(|| format!("reading corpus {}", corpus.display()))?;
            let mut manifest = RunManifest::new(
                "analyze tf-baseline",
                None,
                serde_json::json!({ "pair": pair, "window": window }),
            )?;
            manifest.input("corpus", &corpus)?;
            let s = tf_baseline_trend(&articles, &pair)?;
            let mut table = Table::new(["pair", "predicate", "month", "mean_tf", "n_articles"]);
            for k in s.top(3) {
                for (t, v) in s.component(k).into_iter().enumerate() {
                    table.push(vec![
                        pair.to_string(),
                        s.components[k].clone(),
                        s.month_labels[t].clone(),
                        fmt_opt(v),
                        s.counts[t].to_string(),
                    ]);
                }
            }
            emit(&table, out.as_deref(), &manifest)?;
            let r = s.change_rate(window)?;
            let events = load_events(events.as_deref())?;
            let labels = s.month_labels.clone();
            change_rate_table(&[(s, r)], &events, &labels, window, &manifest, None, None)
        }
    }
}
