//! Baseline that averages every word of an article and blends each
//! distribution with the previous one of the same pair.
//!
//! This follows only the simplified description `d_t = α d_{t-1} + (1-α)
//! softmax(W [avg; v_e])` with α = 0.5; it is not a reproduction of the
//! original recurrent network.

use std::collections::{BTreeSet, HashMap};

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::math::{softmax, xavier_uniform};
use super::RelationDistribution;
use crate::annotate::{group_by_pair, AnnotatedArticle, EntityPair};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmnConfig {
    pub relations: usize,
    pub word_dim: usize,
    pub entity_dim: usize,
    /// Weight on the previous distribution.
    pub recurrence: f64,
    /// Most frequent words removed from the input.
    pub drop_most_frequent: usize,
    /// Least frequent words removed from the input.
    pub drop_least_frequent: usize,
}

impl Default for RmnConfig {
    fn default() -> Self {
        RmnConfig {
            relations: 30,
            word_dim: 300,
            entity_dim: 50,
            recurrence: 0.5,
            drop_most_frequent: 500,
            drop_least_frequent: 5000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RmnParams {
    pub config: RmnConfig,
    pub entities: Vec<String>,
    /// Words excluded from the averaged input, sorted.
    pub removed_words: Vec<String>,
    pub relations: Array2<f64>,
    pub entity_emb: Array2<f64>,
    /// K × (d + entity_dim)
    pub w: Array2<f64>,
}

impl RmnParams {
    pub fn init<R: Rng + ?Sized>(
        config: RmnConfig,
        corpus: &[AnnotatedArticle],
        rng: &mut R,
    ) -> Result<Self> {
        if config.relations == 0 || config.word_dim == 0 || config.entity_dim == 0 {
            return Err(Error::Config("RMN dimensions must be positive".into()));
        }
        if !(0.0..=1.0).contains(&config.recurrence) {
            return Err(Error::Config("recurrence must lie in [0, 1]".into()));
        }
        let mut entities: Vec<String> = corpus
            .iter()
            .flat_map(|a| [a.pair.first().to_string(), a.pair.second().to_string()])
            .collect();
        entities.sort();
        entities.dedup();

        let mut counts: HashMap<String, usize> = HashMap::new();
        for a in corpus {
            for w in input_words(a) {
                *counts.entry(w.to_lowercase()).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let n = ranked.len();
        let top = config.drop_most_frequent.min(n);
        let bottom = config.drop_least_frequent.min(n - top);
        let mut removed: Vec<String> = ranked[..top]
            .iter()
            .chain(&ranked[n - bottom..])
            .map(|(w, _)| w.clone())
            .collect();
        removed.sort();

        let relations = xavier_uniform(config.relations, config.word_dim, rng);
        let entity_emb = xavier_uniform(entities.len(), config.entity_dim, rng);
        let w = xavier_uniform(config.relations, config.word_dim + config.entity_dim, rng);
        Ok(RmnParams {
            config,
            entities,
            removed_words: removed,
            relations,
            entity_emb,
            w,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        let expected = [
            ("relations", &self.relations, (c.relations, c.word_dim)),
            ("entity_emb", &self.entity_emb, (self.entities.len(), c.entity_dim)),
            ("w", &self.w, (c.relations, c.word_dim + c.entity_dim)),
        ];
        for (name, t, shape) in expected {
            if t.dim() != shape || t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Shape {
                    name: name.into(),
                    expected: format!("{shape:?}, finite"),
                    found: format!("{:?}", t.dim()),
                });
            }
        }
        Ok(())
    }

    fn entity_row(&self, e: &str) -> Result<usize> {
        self.entities
            .binary_search_by(|x| x.as_str().cmp(e))
            .map_err(|_| Error::UnknownEntity(e.to_string()))
    }
}

/// The words the baseline averages: the full lemma list when present,
/// otherwise predicates and nouns.
fn input_words(a: &AnnotatedArticle) -> Vec<&str> {
    if a.words.is_empty() {
        a.predicates.iter().chain(&a.nouns).map(String::as_str).collect()
    } else {
        a.words.iter().map(String::as_str).collect()
    }
}

/// An article resolved for the baseline: averaged word vector and entity rows.
#[derive(Clone, Debug, PartialEq)]
pub struct RmnPrepared {
    pub article_id: String,
    pub pair: EntityPair,
    pub month: usize,
    pub entities: [usize; 2],
    /// Mean of the embedded, non-removed word vectors.
    pub span: Array1<f64>,
}

impl RmnPrepared {
    /// `Ok(None)` when no input word survives filtering and lookup.
    pub fn new(a: &AnnotatedArticle, params: &RmnParams, emb: &EmbeddingTable) -> Result<Option<Self>> {
        if emb.dim() != params.config.word_dim {
            return Err(Error::Shape {
                name: "embeddings".into(),
                expected: format!("dimension {}", params.config.word_dim),
                found: format!("dimension {}", emb.dim()),
            });
        }
        let removed: BTreeSet<&str> = params.removed_words.iter().map(String::as_str).collect();
        let mut span = Array1::zeros(emb.dim());
        let mut n = 0usize;
        for w in input_words(a) {
            if removed.contains(w.to_lowercase().as_str()) {
                continue;
            }
            if let Some(v) = emb.get(w) {
                span += &v;
                n += 1;
            }
        }
        if n == 0 {
            return Ok(None);
        }
        span /= n as f64;
        Ok(Some(RmnPrepared {
            article_id: a.article_id.clone(),
            pair: a.pair.clone(),
            month: a.month,
            entities: [
                params.entity_row(a.pair.first())?,
                params.entity_row(a.pair.second())?,
            ],
            span,
        }))
    }

    pub fn input(&self, params: &RmnParams) -> Array1<f64> {
        let v_e = &params.entity_emb.row(self.entities[0]) + &params.entity_emb.row(self.entities[1]);
        concatenate(Axis(0), &[self.span.view(), v_e.view()]).expect("1-d concatenation")
    }
}

/// Blend of the previous distribution and the current softmax output.
pub fn blend(prev: Option<&Array1<f64>>, current: Array1<f64>, recurrence: f64) -> Array1<f64> {
    match prev {
        Some(p) => p * recurrence + current * (1.0 - recurrence),
        None => current,
    }
}

/// One baseline step for `article`, given the previous distribution of the
/// same pair (`None` for the first step).
pub fn rmn_forward(
    article: &AnnotatedArticle,
    params: &RmnParams,
    emb: &EmbeddingTable,
    prev: Option<&RelationDistribution>,
) -> Result<RelationDistribution> {
    let prep = RmnPrepared::new(article, params, emb)?.ok_or_else(|| {
        Error::Input(format!("article {} has no usable words", article.article_id))
    })?;
    if let Some(p) = prev {
        if p.len() != params.config.relations {
            return Err(Error::Input("previous distribution has the wrong length".into()));
        }
    }
    let current = softmax(params.w.dot(&prep.input(params)).view());
    Ok(RelationDistribution(blend(
        prev.map(|p| &p.0),
        current,
        params.config.recurrence,
    )))
}

/// Order in which the baseline walks a pair's articles: by month, then id.
pub(crate) fn sequence_order(corpus: &[AnnotatedArticle]) -> Vec<Vec<usize>> {
    group_by_pair(corpus)
        .into_values()
        .map(|mut idx| {
            idx.sort_by(|&a, &b| {
                (corpus[a].month, &corpus[a].article_id).cmp(&(corpus[b].month, &corpus[b].article_id))
            });
            idx
        })
        .collect()
}

/// Runs the baseline over every pair sequence. Aligned with `corpus`.
pub fn rmn_infer(
    corpus: &[AnnotatedArticle],
    params: &RmnParams,
    emb: &EmbeddingTable,
) -> Result<Vec<Option<RelationDistribution>>> {
    let mut out = vec![None; corpus.len()];
    for seq in sequence_order(corpus) {
        let mut prev: Option<RelationDistribution> = None;
        for i in seq {
            if RmnPrepared::new(&corpus[i], params, emb)?.is_none() {
                continue;
            }
            let d = rmn_forward(&corpus[i], params, emb, prev.as_ref())?;
            prev = Some(d.clone());
            out[i] = Some(d);
        }
    }
    Ok(out)
}
