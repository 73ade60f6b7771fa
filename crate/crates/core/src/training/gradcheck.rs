//! Central finite-difference verification of the analytic gradients.

use ndarray::{Array1, ArrayView1};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::backprop::accumulate_article_gradient;
use super::loss::{orthogonality_grad, orthogonality_penalty};
use crate::embeddings::EmbeddingTable;
use crate::model::math::cosine;
use crate::model::{forward, ModelParams, PreparedArticle, Tensors, TENSOR_NAMES};

/// `|a − n| / max(1e-8, |a| + |n|)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Max relative error between `analytic` and central differences of `f` at
/// the given coordinates.
pub fn check_gradient<F>(mut f: F, x: &[f64], analytic: &[f64], coords: &[usize], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut x = x.to_vec();
    let mut worst: f64 = 0.0;
    for &i in coords {
        let orig = x[i];
        x[i] = orig + eps;
        let fp = f(&x);
        x[i] = orig - eps;
        let fm = f(&x);
        x[i] = orig;
        worst = worst.max(relative_error(analytic[i], (fp - fm) / (2.0 * eps)));
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation crossed a ReLU or hinge kink.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

/// Loss of one article plus `λ X`, with the activation pattern of its kinks.
fn objective(
    params: &ModelParams,
    art: &PreparedArticle,
    emb: &EmbeddingTable,
    label: ArrayView1<'_, f64>,
    negatives: &[ArrayView1<'_, f64>],
    lambda: f64,
) -> (f64, Vec<bool>) {
    let fp = forward(params, art, emb, None);
    let pos = cosine(fp.recon.view(), label);
    let mut pattern: Vec<bool> = fp.pre_relu.iter().map(|&x| x > 0.0).collect();
    let mut loss = 0.0;
    for neg in negatives {
        let m = 1.0 - pos + cosine(fp.recon.view(), *neg);
        pattern.push(m > 0.0);
        loss += m.max(0.0);
    }
    (loss + lambda * orthogonality_penalty(params.tensors.relations.view()), pattern)
}

/// Compares the analytic gradient of `J + λX` for one article (no dropout)
/// with central differences on up to `samples` coordinates of every tensor.
pub fn grad_check(
    params: &ModelParams,
    art: &PreparedArticle,
    emb: &EmbeddingTable,
    negatives: &[Array1<f64>],
    lambda: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> GradCheckReport {
    let label = art.label(emb);
    let negs: Vec<ArrayView1<'_, f64>> = negatives.iter().map(|n| n.view()).collect();

    let mut analytic = Tensors::zeros_like(&params.tensors);
    accumulate_article_gradient(params, art, emb, None, label.view(), &negs, 1.0, &mut analytic);
    let (_, ortho) = orthogonality_grad(params.tensors.relations.view());
    analytic.relations.scaled_add(lambda, &ortho);

    let (_, base_pattern) = objective(params, art, emb, label.view(), &negs, lambda);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work = params.clone();
    let mut report = Vec::new();

    for (ti, name) in TENSOR_NAMES.iter().enumerate() {
        let len = analytic.iter()[ti].1.len();
        let coords: Vec<usize> = if len <= samples {
            (0..len).collect()
        } else {
            sample(&mut rng, len, samples).into_vec()
        };
        let grad: Vec<f64> = analytic.iter()[ti].1.iter().copied().collect();
        let mut check = TensorCheck {
            name,
            max_rel_error: 0.0,
            checked: 0,
            skipped: 0,
        };
        for i in coords {
            let mut eval = |delta: f64| {
                let tensors = work.tensors.iter_mut();
                let slot = tensors[ti].1.as_slice_mut().expect("standard layout");
                let orig = slot[i];
                slot[i] = orig + delta;
                let out = objective(&work, art, emb, label.view(), &negs, lambda);
                let tensors = work.tensors.iter_mut();
                tensors[ti].1.as_slice_mut().expect("standard layout")[i] = orig;
                out
            };
            let (fp, pp) = eval(eps);
            let (fm, pm) = eval(-eps);
            if pp != base_pattern || pm != base_pattern {
                check.skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * eps);
            check.checked += 1;
            check.max_rel_error = check.max_rel_error.max(relative_error(grad[i], numeric));
        }
        report.push(check);
    }
    GradCheckReport { tensors: report }
}
