//! Minibatch Adam training of the relation model under the contrastive
//! reconstruction objective `J + λX`.
//!
//! Each minibatch draws fresh word-dropout masks and negatives from a single
//! seeded generator before gradients are computed. Gradients are summed in
//! fixed-size chunks of articles (in parallel) and the chunk sums are reduced
//! in order, so results do not depend on the thread count.

mod adam;
mod backprop;
mod gradcheck;
mod loss;
mod negatives;

use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use backprop::{accumulate_article_gradient, backward};
pub use gradcheck::{check_gradient, grad_check, relative_error, GradCheckReport, TensorCheck};
pub use loss::{hinge_loss, hinge_loss_grad, orthogonality_grad, orthogonality_penalty};
pub use negatives::{sample_negative_indices, sample_negatives};

use crate::annotate::AnnotatedArticle;
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::model::math::softmax;
use crate::model::{blend, sequence_order};
use crate::model::{
    prepare_corpus, ModelConfig, ModelParams, PreparedArticle, RmnConfig, RmnParams, RmnPrepared,
    Tensors,
};

/// Articles per gradient chunk. Part of the determinism contract: changing
/// it changes floating-point summation order.
const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub negatives: usize,
    /// Weight λ of the orthogonality penalty.
    pub lambda: f64,
    /// Probability of dropping each predicate from `v_p` during training.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            learning_rate: 1e-3,
            batch_size: 256,
            negatives: 15,
            lambda: 0.1,
            dropout: 0.5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.negatives == 0 {
            return Err(Error::Config(
                "epochs, batch size and negatives must be positive".into(),
            ));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config("lambda must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Loss terms; `total = hinge + lambda * orthogonality`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "J")]
    pub hinge: f64,
    #[serde(rename = "X")]
    pub orthogonality: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(hinge: f64, orthogonality: f64, lambda: f64) -> Self {
        LossBreakdown {
            hinge,
            orthogonality,
            total: hinge + lambda * orthogonality,
        }
    }
}

/// One line of the training log: mean per-article hinge loss and mean
/// penalty over the epoch's minibatches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

#[derive(Clone, Debug)]
pub struct TrainOutput<P> {
    pub params: P,
    pub log: Vec<EpochLog>,
}

struct Sample {
    index: usize,
    mask: Option<Vec<bool>>,
    negatives: Vec<usize>,
}

fn draw_samples<R: Rng>(
    batch: &[usize],
    n: usize,
    pred_counts: impl Fn(usize) -> usize,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<Vec<Sample>> {
    batch
        .iter()
        .map(|&i| {
            let mask = (config.dropout > 0.0).then(|| {
                (0..pred_counts(i))
                    .map(|_| rng.gen_bool(1.0 - config.dropout))
                    .collect()
            });
            let negatives = sample_negative_indices(n, i, config.negatives, rng)?;
            Ok(Sample {
                index: i,
                mask,
                negatives,
            })
        })
        .collect()
}

fn first_non_finite(losses: &[(usize, f64)]) -> Option<usize> {
    losses.iter().find(|(_, l)| !l.is_finite()).map(|(i, _)| *i)
}

/// Trains the relation model with an observer called after every epoch.
pub fn train_with<F>(
    corpus: &[AnnotatedArticle],
    model: ModelConfig,
    config: &TrainConfig,
    emb: &EmbeddingTable,
    mut on_epoch: F,
) -> Result<TrainOutput<ModelParams>>
where
    F: FnMut(&EpochLog),
{
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::CorpusTooSmall("empty corpus".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::for_corpus(model, corpus, &mut rng)?;
    let prepared: Vec<PreparedArticle> = prepare_corpus(corpus, &params, emb)?
        .into_iter()
        .flatten()
        .collect();
    if prepared.len() < 2 {
        return Err(Error::CorpusTooSmall(format!(
            "{} trainable article(s); negative sampling needs at least 2",
            prepared.len()
        )));
    }
    let labels: Vec<Array1<f64>> = prepared.iter().map(|a| a.label(emb)).collect();
    let mut adam = Adam::new(config.learning_rate, params.tensors.iter().map(|(_, t)| t));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let mut iteration = 0;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut hinge_sum = 0.0;
        let mut ortho_sum = 0.0;
        let mut batches = 0;
        for batch in order.chunks(config.batch_size) {
            let samples = draw_samples(
                batch,
                prepared.len(),
                |i| prepared[i].predicates.len(),
                config,
                &mut rng,
            )?;
            let scale = 1.0 / batch.len() as f64;
            let partials: Vec<(Tensors, Vec<(usize, f64)>)> = samples
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut grads = Tensors::zeros_like(&params.tensors);
                    let losses = chunk
                        .iter()
                        .map(|s| {
                            let negs: Vec<ArrayView1<'_, f64>> =
                                s.negatives.iter().map(|&j| labels[j].view()).collect();
                            let l = accumulate_article_gradient(
                                &params,
                                &prepared[s.index],
                                emb,
                                s.mask.as_deref(),
                                labels[s.index].view(),
                                &negs,
                                scale,
                                &mut grads,
                            );
                            (s.index, l)
                        })
                        .collect();
                    (grads, losses)
                })
                .collect();

            let mut grads = Tensors::zeros_like(&params.tensors);
            let mut batch_hinge = 0.0;
            for (g, losses) in &partials {
                if let Some(bad) = first_non_finite(losses) {
                    return Err(Error::NonFinite {
                        iteration,
                        article_id: prepared[bad].article_id.clone(),
                    });
                }
                grads.add_assign(g);
                batch_hinge += losses.iter().map(|(_, l)| l).sum::<f64>();
            }
            let (x, ortho) = orthogonality_grad(params.tensors.relations.view());
            grads.relations.scaled_add(config.lambda, &ortho);
            if !x.is_finite() {
                return Err(Error::NonFinite {
                    iteration,
                    article_id: "<orthogonality penalty>".into(),
                });
            }
            hinge_sum += batch_hinge;
            ortho_sum += x;
            batches += 1;

            adam.step(
                params.tensors.iter_mut().into_iter().map(|(_, t)| t).collect(),
                grads.iter().into_iter().map(|(_, t)| t).collect(),
            );
            iteration += 1;
        }
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: LossBreakdown::new(
                hinge_sum / prepared.len() as f64,
                ortho_sum / batches as f64,
                config.lambda,
            ),
        };
        if !entry.loss.total.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                article_id: "<epoch mean>".into(),
            });
        }
        log::info!(
            "epoch {}: J={:.6} X={:.6} total={:.6}",
            entry.epoch,
            entry.loss.hinge,
            entry.loss.orthogonality,
            entry.loss.total
        );
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutput { params, log })
}

pub fn train(
    corpus: &[AnnotatedArticle],
    model: ModelConfig,
    config: &TrainConfig,
    emb: &EmbeddingTable,
) -> Result<TrainOutput<ModelParams>> {
    train_with(corpus, model, config, emb, |_| {})
}

struct RmnGrads {
    relations: ndarray::Array2<f64>,
    entity_emb: ndarray::Array2<f64>,
    w: ndarray::Array2<f64>,
}

impl RmnGrads {
    fn zeros(p: &RmnParams) -> Self {
        RmnGrads {
            relations: ndarray::Array2::zeros(p.relations.raw_dim()),
            entity_emb: ndarray::Array2::zeros(p.entity_emb.raw_dim()),
            w: ndarray::Array2::zeros(p.w.raw_dim()),
        }
    }

    fn add(&mut self, o: &RmnGrads) {
        self.relations += &o.relations;
        self.entity_emb += &o.entity_emb;
        self.w += &o.w;
    }
}

/// Hinge loss of one baseline article; gradient added into `grads`. The
/// previous distribution is a constant.
fn rmn_article_gradient(
    params: &RmnParams,
    art: &RmnPrepared,
    prev: Option<&Array1<f64>>,
    negatives: &[ArrayView1<'_, f64>],
    scale: f64,
    grads: &mut RmnGrads,
) -> f64 {
    use crate::model::math::softmax_backward;
    let x = art.input(params);
    let current = softmax(params.w.dot(&x).view());
    let dist = blend(prev, current.clone(), params.config.recurrence);
    let recon = params.relations.t().dot(&dist);
    let (loss, d_recon) = hinge_loss_grad(recon.view(), art.span.view(), negatives);
    if loss == 0.0 {
        return 0.0;
    }
    let d_recon = d_recon * scale;
    backprop::add_outer(grads.relations.view_mut(), dist.view(), d_recon.view());
    let mut d_current = params.relations.dot(&d_recon);
    if prev.is_some() {
        d_current *= 1.0 - params.config.recurrence;
    }
    let d_logits = softmax_backward(current.view(), d_current.view());
    backprop::add_outer(grads.w.view_mut(), d_logits.view(), x.view());
    let d_x = params.w.t().dot(&d_logits);
    let d_ve = d_x.slice(ndarray::s![params.config.word_dim..]);
    for &row in &art.entities {
        grads.entity_emb.row_mut(row).scaled_add(1.0, &d_ve);
    }
    loss
}

/// Trains the averaging baseline. Previous-step distributions are refreshed
/// at the start of every epoch and held fixed within it.
pub fn train_rmn_with<F>(
    corpus: &[AnnotatedArticle],
    model: RmnConfig,
    config: &TrainConfig,
    emb: &EmbeddingTable,
    mut on_epoch: F,
) -> Result<TrainOutput<RmnParams>>
where
    F: FnMut(&EpochLog),
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = RmnParams::init(model, corpus, &mut rng)?;

    // sequence order over prepared articles
    let mut prepared: Vec<RmnPrepared> = Vec::new();
    let mut prev_of: Vec<Option<usize>> = Vec::new();
    for seq in sequence_order(corpus) {
        let mut last = None;
        for i in seq {
            if let Some(p) = RmnPrepared::new(&corpus[i], &params, emb)? {
                prev_of.push(last);
                last = Some(prepared.len());
                prepared.push(p);
            }
        }
    }
    if prepared.len() < 2 {
        return Err(Error::CorpusTooSmall(format!(
            "{} trainable article(s); negative sampling needs at least 2",
            prepared.len()
        )));
    }
    let mut adam = Adam::new(
        config.learning_rate,
        [&params.relations, &params.entity_emb, &params.w],
    );
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut log = Vec::new();
    let mut iteration = 0;

    for epoch in 0..config.epochs {
        // sequential pass: distributions under the current parameters
        let mut dists: Vec<Array1<f64>> = Vec::with_capacity(prepared.len());
        for (i, art) in prepared.iter().enumerate() {
            let current = softmax(params.w.dot(&art.input(&params)).view());
            let d = blend(prev_of[i].map(|j| &dists[j]), current, params.config.recurrence);
            dists.push(d);
        }

        order.shuffle(&mut rng);
        let (mut hinge_sum, mut ortho_sum, mut batches) = (0.0, 0.0, 0);
        for batch in order.chunks(config.batch_size) {
            let samples = draw_samples(batch, prepared.len(), |_| 0, config, &mut rng)?;
            let scale = 1.0 / batch.len() as f64;
            let partials: Vec<(RmnGrads, Vec<(usize, f64)>)> = samples
                .par_chunks(CHUNK)
                .map(|chunk| {
                    let mut grads = RmnGrads::zeros(&params);
                    let losses = chunk
                        .iter()
                        .map(|s| {
                            let negs: Vec<ArrayView1<'_, f64>> =
                                s.negatives.iter().map(|&j| prepared[j].span.view()).collect();
                            let prev = prev_of[s.index].map(|j| &dists[j]);
                            let l = rmn_article_gradient(
                                &params,
                                &prepared[s.index],
                                prev,
                                &negs,
                                scale,
                                &mut grads,
                            );
                            (s.index, l)
                        })
                        .collect();
                    (grads, losses)
                })
                .collect();
            let mut grads = RmnGrads::zeros(&params);
            for (g, losses) in &partials {
                if let Some(bad) = first_non_finite(losses) {
                    return Err(Error::NonFinite {
                        iteration,
                        article_id: prepared[bad].article_id.clone(),
                    });
                }
                grads.add(g);
                hinge_sum += losses.iter().map(|(_, l)| l).sum::<f64>();
            }
            let (x, ortho) = orthogonality_grad(params.relations.view());
            grads.relations.scaled_add(config.lambda, &ortho);
            ortho_sum += x;
            batches += 1;
            adam.step(
                vec![&mut params.relations, &mut params.entity_emb, &mut params.w],
                vec![&grads.relations, &grads.entity_emb, &grads.w],
            );
            iteration += 1;
        }
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: LossBreakdown::new(
                hinge_sum / prepared.len() as f64,
                ortho_sum / batches as f64,
                config.lambda,
            ),
        };
        if !entry.loss.total.is_finite() {
            return Err(Error::NonFinite {
                iteration,
                article_id: "<epoch mean>".into(),
            });
        }
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutput { params, log })
}

pub fn train_rmn(
    corpus: &[AnnotatedArticle],
    model: RmnConfig,
    config: &TrainConfig,
    emb: &EmbeddingTable,
) -> Result<TrainOutput<RmnParams>> {
    train_rmn_with(corpus, model, config, emb, |_| {})
}
