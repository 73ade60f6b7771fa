use std::collections::BTreeMap;

use ndarray::Array2;
use serde::Serialize;

use super::{check_aligned, pair_articles};
use crate::annotate::{month_labels, AnnotatedArticle, EntityPair};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::{attend_nouns, ModelParams, RelationDistribution};

/// Share of a pair's articles, ranked by weight on the relation, whose
/// nouns are scored.
pub const DEFAULT_TOP_FRACTION: f64 = 0.1;

const TOP_WORDS: usize = 10;

/// Word-by-month scores, normalised by the global maximum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContextMatrix {
    pub name: String,
    /// Row labels, sorted.
    pub words: Vec<String>,
    /// `words × months`.
    pub scores: Array2<f64>,
    /// Set when every raw score is zero, so nothing could be normalised.
    pub degenerate: bool,
    /// Highest total score over months, best first.
    pub top: Vec<(String, f64)>,
}

impl ContextMatrix {
    fn new(name: &str, words: &[String], mut scores: Array2<f64>) -> Self {
        let max = scores.iter().cloned().fold(0.0, f64::max);
        let degenerate = max <= 0.0;
        if !degenerate {
            scores /= max;
        }
        let mut top: Vec<(String, f64)> = words
            .iter()
            .zip(scores.rows())
            .map(|(w, r)| (w.clone(), r.sum()))
            .collect();
        top.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        top.truncate(TOP_WORDS);
        ContextMatrix {
            name: name.into(),
            words: words.to_vec(),
            scores,
            degenerate,
            top,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContextWords {
    pub relation: usize,
    pub month_labels: Vec<String>,
    /// Number of articles scored.
    pub articles: usize,
    /// Mean attention per word and month.
    pub attention: ContextMatrix,
    /// Occurrences per word and month.
    pub frequency: ContextMatrix,
    /// Mean attention times the log of the occurrence count.
    pub attention_log_frequency: ContextMatrix,
}

/// Scores the nouns of the pair's articles that put the most weight on
/// `relation`. The top `top_fraction` of articles (at least one) by that
/// weight are used.
pub fn context_words(
    corpus: &[AnnotatedArticle],
    dists: &[Option<RelationDistribution>],
    pair: &EntityPair,
    relation: usize,
    params: &ModelParams,
    emb: &EmbeddingTable,
    top_fraction: f64,
) -> Result<ContextWords> {
    check_aligned(corpus, dists)?;
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::Config("top fraction must lie in (0, 1]".into()));
    }
    if relation >= params.config.relations {
        return Err(Error::Config(format!(
            "relation {relation} outside 0..{}",
            params.config.relations
        )));
    }
    let mut ranked: Vec<(usize, f64)> = pair_articles(corpus, pair)?
        .into_iter()
        .filter_map(|i| dists[i].as_ref().map(|d| (i, d.0[relation])))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let take = ((ranked.len() as f64 * top_fraction).ceil() as usize).min(ranked.len());
    ranked.truncate(take);

    let labels = month_labels(corpus);
    let months = labels.len();
    // word -> month -> (alpha sum, count)
    let mut acc: BTreeMap<String, Vec<(f64, usize)>> = BTreeMap::new();
    for &(i, _) in &ranked {
        let (_, rec) = attend_nouns(&corpus[i], params, emb)?;
        for (noun, &a) in rec.nouns.iter().zip(rec.alpha.iter()) {
            let cell = &mut acc.entry(noun.clone()).or_insert_with(|| vec![(0.0, 0); months])
                [corpus[i].month];
            cell.0 += a;
            cell.1 += 1;
        }
    }
    if acc.is_empty() {
        return Err(Error::Undefined(format!(
            "no embedded nouns in the top articles of relation {relation} for {pair}"
        )));
    }
    let words: Vec<String> = acc.keys().cloned().collect();
    let mut att = Array2::<f64>::zeros((words.len(), months));
    let mut freq = att.clone();
    let mut mixed = att.clone();
    for (r, cells) in acc.values().enumerate() {
        for (t, &(sum, n)) in cells.iter().enumerate() {
            if n > 0 {
                let mean = sum / n as f64;
                att[[r, t]] = mean;
                freq[[r, t]] = n as f64;
                mixed[[r, t]] = mean * (n as f64).ln();
            }
        }
    }
    Ok(ContextWords {
        relation,
        month_labels: labels,
        articles: ranked.len(),
        attention: ContextMatrix::new("attention", &words, att),
        frequency: ContextMatrix::new("frequency", &words, freq),
        attention_log_frequency: ContextMatrix::new("attention_log_frequency", &words, mixed),
    })
}
