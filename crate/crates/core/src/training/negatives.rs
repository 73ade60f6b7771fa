use ndarray::Array1;
use rand::Rng;

use crate::error::{Error, Result};

/// Draws `count` article indices uniformly (with replacement) from
/// `0..n_articles`, never returning `current`.
pub fn sample_negative_indices<R: Rng + ?Sized>(
    n_articles: usize,
    current: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n_articles < 2 {
        return Err(Error::CorpusTooSmall(format!(
            "negative sampling needs at least 2 articles, found {n_articles}"
        )));
    }
    Ok((0..count)
        .map(|_| {
            let i = rng.gen_range(0..n_articles - 1);
            if i >= current {
                i + 1
            } else {
                i
            }
        })
        .collect())
}

/// Label vectors of `count` randomly drawn articles other than `current`.
pub fn sample_negatives<R: Rng + ?Sized>(
    labels: &[Array1<f64>],
    current: usize,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Array1<f64>>> {
    Ok(sample_negative_indices(labels.len(), current, count, rng)?
        .into_iter()
        .map(|i| labels[i].clone())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_articles_gives_the_other() {
        let labels = vec![array![1.0, 0.0], array![0.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_negatives(&labels, 0, 1, &mut rng).unwrap(), vec![array![0.0, 1.0]]);
        assert_eq!(sample_negatives(&labels, 1, 3, &mut rng).unwrap(), vec![array![1.0, 0.0]; 3]);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = sample_negative_indices(50, 7, 15, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_negative_indices(50, 7, 15, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains(&7));
    }

    #[test]
    fn single_article_is_too_small() {
        let err = sample_negative_indices(1, 0, 1, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::CorpusTooSmall(_)));
    }

    #[test]
    fn uniform_over_other_articles() {
        // chi-square goodness of fit against the uniform distribution over the
        // 9 admissible indices; 99.9% critical value for 8 dof is 26.12
        let n = 10;
        let current = 4;
        let draws = 100_000;
        let idx =
            sample_negative_indices(n, current, draws, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let mut counts = vec![0usize; n];
        for i in idx {
            counts[i] += 1;
        }
        assert_eq!(counts[current], 0);
        let expected = draws as f64 / (n - 1) as f64;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != current)
            .map(|(_, &c)| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 26.12, "chi2 = {chi2}");
        // every bucket within 3 sigma of its binomial expectation
        let sigma = (draws as f64 * (1.0 / 9.0) * (8.0 / 9.0)).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            if i != current {
                assert!((c as f64 - expected).abs() < 3.0 * sigma, "bucket {i}: {c}");
            }
        }
    }
}
