//! Hand-derived reverse pass through the relation model.

use ndarray::{s, Array1, ArrayView1, ArrayViewMut2};

use super::loss::hinge_loss_grad;
use crate::embeddings::EmbeddingTable;
use crate::model::math::softmax_backward;
use crate::model::{forward, ForwardPass, ModelParams, PreparedArticle, Tensors};

/// `g += a ⊗ b`, skipping zero rows of `a`.
pub(crate) fn add_outer(mut g: ArrayViewMut2<'_, f64>, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) {
    for (mut row, &ai) in g.rows_mut().into_iter().zip(a) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

/// Hinge loss of one article and the accumulation of its gradient into
/// `grads`, scaled by `scale`. Embeddings receive no gradient.
pub fn accumulate_article_gradient(
    params: &ModelParams,
    art: &PreparedArticle,
    emb: &EmbeddingTable,
    mask: Option<&[bool]>,
    label: ArrayView1<'_, f64>,
    negatives: &[ArrayView1<'_, f64>],
    scale: f64,
    grads: &mut Tensors,
) -> f64 {
    let fp = forward(params, art, emb, mask);
    let (loss, d_recon) = hinge_loss_grad(fp.recon.view(), label, negatives);
    if loss == 0.0 {
        return 0.0;
    }
    backward(params, art, emb, &fp, &(d_recon * scale), grads);
    loss
}

/// Backpropagates `d_recon = ∂L/∂r` through a cached forward pass.
pub fn backward(
    params: &ModelParams,
    art: &PreparedArticle,
    emb: &EmbeddingTable,
    fp: &ForwardPass,
    d_recon: &Array1<f64>,
    grads: &mut Tensors,
) {
    let t = &params.tensors;
    let c = &params.config;

    // r = Rᵀ d
    add_outer(grads.relations.view_mut(), fp.dist.view(), d_recon.view());
    let d_dist = t.relations.dot(d_recon);

    // d = softmax(W_final f)
    let d_logits = softmax_backward(fp.dist.view(), d_dist.view());
    add_outer(grads.w_final.view_mut(), d_logits.view(), fp.v_final.view());
    let d_vfinal = t.w_final.t().dot(&d_logits);

    // f = relu(W_cat u)
    let d_pre = &d_vfinal * &fp.pre_relu.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
    add_outer(grads.w_cat.view_mut(), d_pre.view(), fp.input.view());
    let d_input = t.w_cat.t().dot(&d_pre);

    let d = c.word_dim;
    let e = c.entity_dim;
    // v_p is built from frozen embeddings: no parameter gradient
    let d_ve = d_input.slice(s![d..d + e]);
    for &row in &art.entities {
        grads.entity_emb.row_mut(row).scaled_add(1.0, &d_ve);
    }
    if fp.hidden.nrows() == 0 {
        return;
    }
    let d_vn = d_input.slice(s![d + e..]);

    // v_n = Σ α_m h_m ; α = softmax(H q)
    let q = t.queries.row(art.pair);
    let d_alpha = fp.hidden.dot(&d_vn);
    let d_scores = softmax_backward(fp.alpha.view(), d_alpha.view());
    let mut d_query = grads.queries.row_mut(art.pair);
    for (m, h) in fp.hidden.rows().into_iter().enumerate() {
        d_query.scaled_add(d_scores[m], &h);
        // ∂/∂h_m = α_m d_vn + ds_m q, then through tanh
        let mut dh = d_vn.to_owned() * fp.alpha[m];
        dh.scaled_add(d_scores[m], &q);
        let dz = &dh * &h.mapv(|x| 1.0 - x * x);
        add_outer(grads.w_proj.slice_mut(s![.., ..d]), dz.view(), emb.row(art.nouns[m]));
        grads.w_proj.column_mut(d + art.month).scaled_add(1.0, &dz);
    }
}
