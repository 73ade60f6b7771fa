use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::model::math::{cosine, cosine_grad};

/// Contrastive max-margin term for one article:
/// `Σ_neg max(0, 1 − cos(r, label) + cos(r, neg))`.
pub fn hinge_loss(
    recon: ArrayView1<'_, f64>,
    label: ArrayView1<'_, f64>,
    negatives: &[ArrayView1<'_, f64>],
) -> f64 {
    let pos = cosine(recon, label);
    negatives
        .iter()
        .map(|neg| (1.0 - pos + cosine(recon, *neg)).max(0.0))
        .sum()
}

/// Hinge loss and its gradient with respect to the reconstruction. Terms
/// sitting exactly on the hinge contribute no gradient.
pub fn hinge_loss_grad(
    recon: ArrayView1<'_, f64>,
    label: ArrayView1<'_, f64>,
    negatives: &[ArrayView1<'_, f64>],
) -> (f64, Array1<f64>) {
    let pos = cosine(recon, label);
    let pos_grad = cosine_grad(recon, label);
    let mut loss = 0.0;
    let mut grad = Array1::zeros(recon.len());
    for neg in negatives {
        let margin = 1.0 - pos + cosine(recon, *neg);
        if margin > 0.0 {
            loss += margin;
            grad -= &pos_grad;
            grad += &cosine_grad(recon, *neg);
        }
    }
    (loss, grad)
}

/// `RRᵀ − I`.
fn gram_residual(relations: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut g = relations.dot(&relations.t());
    for i in 0..g.nrows() {
        g[[i, i]] -= 1.0;
    }
    g
}

/// Frobenius norm of `RRᵀ − I`.
pub fn orthogonality_penalty(relations: ArrayView2<'_, f64>) -> f64 {
    gram_residual(relations).iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Penalty and its gradient `2 (RRᵀ − I) R / X`; zero gradient at X = 0.
pub fn orthogonality_grad(relations: ArrayView2<'_, f64>) -> (f64, Array2<f64>) {
    let g = gram_residual(relations);
    let x = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if x == 0.0 {
        return (0.0, Array2::zeros(relations.raw_dim()));
    }
    let grad = g.dot(&relations) * (2.0 / x);
    (x, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};

    #[test]
    fn satisfied_margin_is_zero() {
        let r = array![1.0, 0.0];
        let label = array![2.0, 0.0];
        let neg = array![-1.0, 0.0];
        assert_eq!(hinge_loss(r.view(), label.view(), &[neg.view()]), 0.0);
    }

    #[test]
    fn negative_equal_to_label_costs_one_each() {
        let r = array![0.3, -0.7, 0.2];
        let label = array![1.0, 2.0, 3.0];
        let negs = [label.view(), label.view(), label.view()];
        assert_eq!(hinge_loss(r.view(), label.view(), &negs), 3.0);
    }

    #[test]
    fn cosine_arithmetic_example() {
        let l = hinge_loss(
            array![1.0, 0.0].view(),
            array![1.0, 1.0].view(),
            &[array![0.0, 1.0].view()],
        );
        assert_abs_diff_eq!(l, 1.0 - 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(l, 0.2929, epsilon = 1e-4);
    }

    #[test]
    fn negatives_order_is_irrelevant() {
        let r = array![0.5, -0.2, 0.9];
        let label = array![0.1, 0.4, 0.2];
        let a = array![1.0, 0.0, 0.0];
        let b = array![0.0, -1.0, 0.3];
        let c = array![0.2, 0.2, -0.8];
        let l1 = hinge_loss(r.view(), label.view(), &[a.view(), b.view(), c.view()]);
        let l2 = hinge_loss(r.view(), label.view(), &[c.view(), a.view(), b.view()]);
        assert_abs_diff_eq!(l1, l2, epsilon = 1e-15);
    }

    #[test]
    fn orthonormal_rows_have_zero_penalty() {
        let s = 0.5f64.sqrt();
        let r = array![[s, s, 0.0], [s, -s, 0.0]];
        assert!(orthogonality_penalty(r.view()) < 1e-15);
    }

    #[test]
    fn scaled_identity_closed_form() {
        for k in [1usize, 3, 7] {
            let r = Array2::<f64>::eye(k) * 2.0;
            // RRᵀ − I = 3I, Frobenius norm 3√K
            assert_abs_diff_eq!(
                orthogonality_penalty(r.view()),
                3.0 * (k as f64).sqrt(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn row_permutation_invariance() {
        let r = array![[0.3, 0.1, -0.4], [1.0, 0.2, 0.0], [0.5, -0.5, 0.7]];
        let p = array![[0.5, -0.5, 0.7], [0.3, 0.1, -0.4], [1.0, 0.2, 0.0]];
        assert_abs_diff_eq!(
            orthogonality_penalty(r.view()),
            orthogonality_penalty(p.view()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn penalty_gradient_matches_finite_difference() {
        let r = array![[0.3, 0.1, -0.4], [1.0, 0.2, 0.0]];
        let (_, g) = orthogonality_grad(r.view());
        let eps = 1e-6;
        for i in 0..2 {
            for j in 0..3 {
                let mut rp = r.clone();
                rp[[i, j]] += eps;
                let mut rm = r.clone();
                rm[[i, j]] -= eps;
                let fd = (orthogonality_penalty(rp.view()) - orthogonality_penalty(rm.view()))
                    / (2.0 * eps);
                assert_abs_diff_eq!(g[[i, j]], fd, epsilon = 1e-8);
            }
        }
    }
}
