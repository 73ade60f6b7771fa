//! Forward computation of the relation model.
//!
//! An article is mapped to a distribution over `K` relation embeddings from
//! three parts: its (word-dropped) predicate sum, the sum of the two entity
//! embeddings, and an attention-weighted summary of its nouns keyed by a
//! per-pair query. The reconstruction is the distribution-weighted mix of the
//! relation rows.

pub mod math;
mod rmn;

use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use rmn::{blend, rmn_forward, rmn_infer, RmnConfig, RmnParams, RmnPrepared};
pub(crate) use rmn::sequence_order;

use crate::annotate::{AnnotatedArticle, EntityPair};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use math::{softmax, xavier_uniform};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of relation embeddings (K).
    pub relations: usize,
    pub word_dim: usize,
    pub entity_dim: usize,
    /// Width of the month one-hot (T).
    pub months: usize,
    pub attention_dim: usize,
    pub final_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            relations: 30,
            word_dim: 300,
            entity_dim: 50,
            months: 30,
            attention_dim: 330,
            final_dim: 300,
        }
    }
}

impl ModelConfig {
    /// Sets the word dimension and the attention width to `word_dim + months`.
    pub fn with_word_dim(mut self, word_dim: usize) -> Self {
        self.word_dim = word_dim;
        self.attention_dim = word_dim + self.months;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("relations", self.relations),
            ("word_dim", self.word_dim),
            ("entity_dim", self.entity_dim),
            ("months", self.months),
            ("attention_dim", self.attention_dim),
            ("final_dim", self.final_dim),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    fn cat_dim(&self) -> usize {
        self.word_dim + self.entity_dim + self.attention_dim
    }
}

/// The trainable tensors. Also used as the gradient container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensors {
    /// K × d relation embeddings.
    pub relations: Array2<f64>,
    /// One row per entity.
    pub entity_emb: Array2<f64>,
    /// One attention query per entity pair.
    pub queries: Array2<f64>,
    pub w_proj: Array2<f64>,
    pub w_cat: Array2<f64>,
    pub w_final: Array2<f64>,
}

pub const TENSOR_NAMES: [&str; 6] = [
    "relations",
    "entity_emb",
    "queries",
    "w_proj",
    "w_cat",
    "w_final",
];

impl Tensors {
    pub fn zeros_like(other: &Tensors) -> Tensors {
        let z = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        Tensors {
            relations: z(&other.relations),
            entity_emb: z(&other.entity_emb),
            queries: z(&other.queries),
            w_proj: z(&other.w_proj),
            w_cat: z(&other.w_cat),
            w_final: z(&other.w_final),
        }
    }

    pub fn iter(&self) -> [(&'static str, &Array2<f64>); 6] {
        [
            ("relations", &self.relations),
            ("entity_emb", &self.entity_emb),
            ("queries", &self.queries),
            ("w_proj", &self.w_proj),
            ("w_cat", &self.w_cat),
            ("w_final", &self.w_final),
        ]
    }

    pub fn iter_mut(&mut self) -> [(&'static str, &mut Array2<f64>); 6] {
        [
            ("relations", &mut self.relations),
            ("entity_emb", &mut self.entity_emb),
            ("queries", &mut self.queries),
            ("w_proj", &mut self.w_proj),
            ("w_cat", &mut self.w_cat),
            ("w_final", &mut self.w_final),
        ]
    }

    pub fn add_assign(&mut self, other: &Tensors) {
        for ((_, a), (_, b)) in self.iter_mut().into_iter().zip(other.iter()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (_, a) in self.iter_mut() {
            *a *= k;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Entity ids, sorted; row order of `entity_emb`.
    pub entities: Vec<String>,
    /// Entity pairs, sorted; row order of `queries`.
    pub pairs: Vec<EntityPair>,
    pub tensors: Tensors,
}

impl ModelParams {
    /// Xavier-initialised parameters for the given entities and pairs.
    pub fn init<R: Rng + ?Sized>(
        config: ModelConfig,
        mut entities: Vec<String>,
        mut pairs: Vec<EntityPair>,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        entities.sort();
        entities.dedup();
        pairs.sort();
        pairs.dedup();
        for p in &pairs {
            for e in [p.first(), p.second()] {
                if entities.binary_search_by(|x| x.as_str().cmp(e)).is_err() {
                    return Err(Error::UnknownEntity(e.to_string()));
                }
            }
        }
        let c = &config;
        let tensors = Tensors {
            relations: xavier_uniform(c.relations, c.word_dim, rng),
            entity_emb: xavier_uniform(entities.len(), c.entity_dim, rng),
            queries: xavier_uniform(pairs.len(), c.attention_dim, rng),
            w_proj: xavier_uniform(c.attention_dim, c.word_dim + c.months, rng),
            w_cat: xavier_uniform(c.final_dim, c.cat_dim(), rng),
            w_final: xavier_uniform(c.relations, c.final_dim, rng),
        };
        Ok(ModelParams {
            config,
            entities,
            pairs,
            tensors,
        })
    }

    /// Parameters covering every entity and pair of `corpus`.
    pub fn for_corpus<R: Rng + ?Sized>(
        config: ModelConfig,
        corpus: &[AnnotatedArticle],
        rng: &mut R,
    ) -> Result<Self> {
        let pairs: Vec<EntityPair> = corpus.iter().map(|a| a.pair.clone()).collect();
        let entities = pairs
            .iter()
            .flat_map(|p| [p.first().to_string(), p.second().to_string()])
            .collect();
        Self::init(config, entities, pairs, rng)
    }

    pub fn entity_row(&self, entity: &str) -> Result<usize> {
        self.entities
            .binary_search_by(|x| x.as_str().cmp(entity))
            .map_err(|_| Error::UnknownEntity(entity.to_string()))
    }

    pub fn pair_row(&self, pair: &EntityPair) -> Result<usize> {
        self.pairs
            .binary_search(pair)
            .map_err(|_| Error::UnknownPair(pair.first().into(), pair.second().into()))
    }

    /// Checks tensor shapes against the config and that all values are finite.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let c = &self.config;
        let expected = [
            (c.relations, c.word_dim),
            (self.entities.len(), c.entity_dim),
            (self.pairs.len(), c.attention_dim),
            (c.attention_dim, c.word_dim + c.months),
            (c.final_dim, c.cat_dim()),
            (c.relations, c.final_dim),
        ];
        for ((name, t), shape) in self.tensors.iter().into_iter().zip(expected) {
            if t.dim() != shape {
                return Err(Error::Shape {
                    name: name.to_string(),
                    expected: format!("{shape:?}"),
                    found: format!("{:?}", t.dim()),
                });
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Shape {
                    name: name.to_string(),
                    expected: "finite values".into(),
                    found: "non-finite value".into(),
                });
            }
        }
        Ok(())
    }
}

/// Weights over the K relations; non-negative and summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationDistribution(pub Array1<f64>);

impl RelationDistribution {
    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.0.iter().enumerate() {
            if w > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Per-noun attention weights and hidden vectors of one article.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionRecord {
    /// Embedded noun lemmas, in article order.
    pub nouns: Vec<String>,
    pub alpha: Array1<f64>,
    /// One row per noun.
    pub hidden: Array2<f64>,
}

/// An article with its words resolved to embedding rows and its pair and
/// entities resolved to parameter rows. Words without embeddings are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedArticle {
    pub article_id: String,
    pub pair: usize,
    pub entities: [usize; 2],
    pub month: usize,
    pub predicates: Vec<usize>,
    pub nouns: Vec<usize>,
}

impl PreparedArticle {
    /// `Ok(None)` when no predicate has an embedding.
    pub fn new(
        article: &AnnotatedArticle,
        params: &ModelParams,
        emb: &EmbeddingTable,
    ) -> Result<Option<Self>> {
        if emb.dim() != params.config.word_dim {
            return Err(Error::Shape {
                name: "embeddings".into(),
                expected: format!("dimension {}", params.config.word_dim),
                found: format!("dimension {}", emb.dim()),
            });
        }
        if article.month >= params.config.months {
            return Err(Error::Config(format!(
                "article {} has month index {} but the model covers {} months",
                article.article_id, article.month, params.config.months
            )));
        }
        let predicates: Vec<usize> = article
            .predicates
            .iter()
            .filter_map(|p| emb.index_of(p))
            .collect();
        if predicates.is_empty() {
            return Ok(None);
        }
        Ok(Some(PreparedArticle {
            article_id: article.article_id.clone(),
            pair: params.pair_row(&article.pair)?,
            entities: [
                params.entity_row(article.pair.first())?,
                params.entity_row(article.pair.second())?,
            ],
            month: article.month,
            predicates,
            nouns: article.nouns.iter().filter_map(|n| emb.index_of(n)).collect(),
        }))
    }

    /// Sum of the predicate vectors (the reconstruction target).
    pub fn label(&self, emb: &EmbeddingTable) -> Array1<f64> {
        let mut v = Array1::zeros(emb.dim());
        for &p in &self.predicates {
            v += &emb.row(p);
        }
        v
    }
}

/// Prepares every article, logging how many were skipped for lack of
/// embedded predicates. The result is aligned with `corpus`.
pub fn prepare_corpus(
    corpus: &[AnnotatedArticle],
    params: &ModelParams,
    emb: &EmbeddingTable,
) -> Result<Vec<Option<PreparedArticle>>> {
    let prepared = corpus
        .iter()
        .map(|a| PreparedArticle::new(a, params, emb))
        .collect::<Result<Vec<_>>>()?;
    let skipped = prepared.iter().filter(|p| p.is_none()).count();
    if skipped > 0 {
        log::info!("{skipped} of {} articles have no embedded predicate", corpus.len());
    }
    Ok(prepared)
}

/// Every intermediate of one forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardPass {
    pub v_p: Array1<f64>,
    pub v_e: Array1<f64>,
    pub hidden: Array2<f64>,
    pub alpha: Array1<f64>,
    pub v_n: Array1<f64>,
    /// `[v_p; v_e; v_n]`
    pub input: Array1<f64>,
    pub pre_relu: Array1<f64>,
    pub v_final: Array1<f64>,
    pub dist: Array1<f64>,
    pub recon: Array1<f64>,
}

/// Noun hidden states `tanh(W_proj [v_n; onehot(month)])`, one row per noun.
pub fn noun_hidden(params: &ModelParams, art: &PreparedArticle, emb: &EmbeddingTable) -> Array2<f64> {
    let d = params.config.word_dim;
    let w = &params.tensors.w_proj;
    let w_words = w.slice(s![.., ..d]);
    let month_col = w.column(d + art.month);
    let mut hidden = Array2::zeros((art.nouns.len(), params.config.attention_dim));
    for (mut row, &n) in hidden.rows_mut().into_iter().zip(&art.nouns) {
        let z = w_words.dot(&emb.row(n)) + month_col;
        row.assign(&z.mapv(f64::tanh));
    }
    hidden
}

/// Full forward pass. `mask` selects which embedded predicates enter `v_p`;
/// `None` keeps all of them.
pub fn forward(
    params: &ModelParams,
    art: &PreparedArticle,
    emb: &EmbeddingTable,
    mask: Option<&[bool]>,
) -> ForwardPass {
    let t = &params.tensors;
    let mut v_p = Array1::zeros(params.config.word_dim);
    for (k, &p) in art.predicates.iter().enumerate() {
        if mask.map_or(true, |m| m[k]) {
            v_p += &emb.row(p);
        }
    }
    let v_e = &t.entity_emb.row(art.entities[0]) + &t.entity_emb.row(art.entities[1]);

    let hidden = noun_hidden(params, art, emb);
    let (alpha, v_n) = if hidden.nrows() == 0 {
        (Array1::zeros(0), Array1::zeros(params.config.attention_dim))
    } else {
        let scores = hidden.dot(&t.queries.row(art.pair));
        let alpha = softmax(scores.view());
        let v_n = hidden.t().dot(&alpha);
        (alpha, v_n)
    };

    let input = concatenate(Axis(0), &[v_p.view(), v_e.view(), v_n.view()])
        .expect("1-d concatenation");
    let pre_relu = t.w_cat.dot(&input);
    let v_final = pre_relu.mapv(|x| x.max(0.0));
    let dist = softmax(t.w_final.dot(&v_final).view());
    let recon = t.relations.t().dot(&dist);
    ForwardPass {
        v_p,
        v_e,
        hidden,
        alpha,
        v_n,
        input,
        pre_relu,
        v_final,
        dist,
        recon,
    }
}

fn prepare_or_skip(
    article: &AnnotatedArticle,
    params: &ModelParams,
    emb: &EmbeddingTable,
) -> Result<PreparedArticle> {
    PreparedArticle::new(article, params, emb)?.ok_or_else(|| {
        Error::Input(format!(
            "article {} has no embedded predicate",
            article.article_id
        ))
    })
}

/// Sum of the embedded predicate vectors, or `None` when there are none
/// (the article is skipped).
pub fn encode_label(article: &AnnotatedArticle, emb: &EmbeddingTable) -> Option<Array1<f64>> {
    let mut v = Array1::zeros(emb.dim());
    let mut any = false;
    for p in &article.predicates {
        if let Some(row) = emb.get(p) {
            v += &row;
            any = true;
        }
    }
    any.then_some(v)
}

/// `Σ b_k v_{p_k}` with one mask entry per predicate of the article.
/// Predicates without an embedding contribute nothing.
pub fn encode_predicates(
    article: &AnnotatedArticle,
    emb: &EmbeddingTable,
    mask: &[bool],
) -> Result<Array1<f64>> {
    if mask.len() != article.predicates.len() {
        return Err(Error::Input(format!(
            "mask has {} entries for {} predicates",
            mask.len(),
            article.predicates.len()
        )));
    }
    let mut v = Array1::zeros(emb.dim());
    for (p, &keep) in article.predicates.iter().zip(mask) {
        if keep {
            if let Some(row) = emb.get(p) {
                v += &row;
            }
        }
    }
    Ok(v)
}

/// `v_{e_i} + v_{e_j}`.
pub fn encode_entity_pair(pair: &EntityPair, params: &ModelParams) -> Result<Array1<f64>> {
    let a = params.entity_row(pair.first())?;
    let b = params.entity_row(pair.second())?;
    Ok(&params.tensors.entity_emb.row(a) + &params.tensors.entity_emb.row(b))
}

/// Attention summary of the article's nouns. With no embedded noun the
/// summary is the zero vector and the record is empty.
pub fn attend_nouns(
    article: &AnnotatedArticle,
    params: &ModelParams,
    emb: &EmbeddingTable,
) -> Result<(Array1<f64>, AttentionRecord)> {
    if article.month >= params.config.months {
        return Err(Error::Config(format!(
            "month index {} outside the model's {} months",
            article.month, params.config.months
        )));
    }
    let nouns: Vec<usize> = article.nouns.iter().filter_map(|n| emb.index_of(n)).collect();
    let art = PreparedArticle {
        article_id: article.article_id.clone(),
        pair: params.pair_row(&article.pair)?,
        entities: [0, 0],
        month: article.month,
        predicates: Vec::new(),
        nouns,
    };
    Ok(attend_prepared(params, &art, emb))
}

pub(crate) fn attend_prepared(
    params: &ModelParams,
    art: &PreparedArticle,
    emb: &EmbeddingTable,
) -> (Array1<f64>, AttentionRecord) {
    let hidden = noun_hidden(params, art, emb);
    let nouns = art.nouns.iter().map(|&i| emb.tokens()[i].clone()).collect();
    if hidden.nrows() == 0 {
        let rec = AttentionRecord {
            nouns,
            alpha: Array1::zeros(0),
            hidden,
        };
        return (Array1::zeros(params.config.attention_dim), rec);
    }
    let alpha = softmax(hidden.dot(&params.tensors.queries.row(art.pair)).view());
    let v_n = hidden.t().dot(&alpha);
    (
        v_n,
        AttentionRecord {
            nouns,
            alpha,
            hidden,
        },
    )
}

/// The article's distribution over relations. `mask` as in [`forward`],
/// indexed over the embedded predicates.
pub fn relation_distribution(
    article: &AnnotatedArticle,
    params: &ModelParams,
    emb: &EmbeddingTable,
    mask: Option<&[bool]>,
) -> Result<RelationDistribution> {
    let art = prepare_or_skip(article, params, emb)?;
    if let Some(m) = mask {
        if m.len() != art.predicates.len() {
            return Err(Error::Input(format!(
                "mask has {} entries for {} embedded predicates",
                m.len(),
                art.predicates.len()
            )));
        }
    }
    Ok(RelationDistribution(forward(params, &art, emb, mask).dist))
}

/// `Rᵀ d`.
pub fn reconstruct(dist: &RelationDistribution, params: &ModelParams) -> Array1<f64> {
    params.tensors.relations.t().dot(&dist.0)
}

/// Inference-mode distributions for the whole corpus, aligned with it.
/// Articles without embedded predicates yield `None`.
pub fn infer(
    corpus: &[AnnotatedArticle],
    params: &ModelParams,
    emb: &EmbeddingTable,
) -> Result<Vec<Option<RelationDistribution>>> {
    let prepared = prepare_corpus(corpus, params, emb)?;
    Ok(prepared
        .par_iter()
        .map(|p| {
            p.as_ref()
                .map(|art| RelationDistribution(forward(params, art, emb, None).dist))
        })
        .collect())
}

/// Which model produced a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Larn(ModelParams),
    Rmn(RmnParams),
}

impl Model {
    pub fn relations(&self) -> ndarray::ArrayView2<'_, f64> {
        match self {
            Model::Larn(p) => p.tensors.relations.view(),
            Model::Rmn(p) => p.relations.view(),
        }
    }

    pub fn infer(
        &self,
        corpus: &[AnnotatedArticle],
        emb: &EmbeddingTable,
    ) -> Result<Vec<Option<RelationDistribution>>> {
        match self {
            Model::Larn(p) => infer(corpus, p, emb),
            Model::Rmn(p) => rmn_infer(corpus, p, emb),
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized parameters plus provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    /// Hash of the run manifest that produced this checkpoint.
    pub manifest_hash: String,
    pub model: Model,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(model: Model, manifest_hash: String) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            manifest_hash,
            model,
            metadata: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses and validates shapes.
    pub fn from_json(s: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(s)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Input(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        match &ckpt.model {
            Model::Larn(p) => p.validate()?,
            Model::Rmn(p) => p.validate()?,
        }
        Ok(ckpt)
    }
}
