use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;

/// Norms below this are clamped before dividing.
pub const NORM_FLOOR: f64 = 1e-12;

/// Numerically stable softmax (max subtracted before exponentiation).
pub fn softmax(logits: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut out = logits.mapv(|x| (x - max).exp());
    let sum = out.sum();
    out /= sum;
    out
}

/// Backward pass of softmax: given `p = softmax(z)` and `dL/dp`, returns `dL/dz`.
pub fn softmax_backward(p: ArrayView1<'_, f64>, grad: ArrayView1<'_, f64>) -> Array1<f64> {
    let inner = p.dot(&grad);
    let mut out = grad.to_owned();
    out -= inner;
    out *= &p;
    out
}

pub fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Cosine similarity with both norms clamped below at [`NORM_FLOOR`].
pub fn cosine(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.dot(&b) / (norm(a).max(NORM_FLOOR) * norm(b).max(NORM_FLOOR))
}

/// Gradient of `cosine(a, b)` with respect to `a`.
pub fn cosine_grad(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let na_raw = norm(a);
    let na = na_raw.max(NORM_FLOOR);
    let nb = norm(b).max(NORM_FLOOR);
    let cos = a.dot(&b) / (na * nb);
    let mut g = b.mapv(|x| x / (na * nb));
    if na_raw > NORM_FLOOR {
        g.scaled_add(-cos / (na * na), &a);
    }
    g
}

/// Glorot/Xavier uniform initialisation, bound `sqrt(6 / (rows + cols))`.
pub fn xavier_uniform<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..bound))
}
