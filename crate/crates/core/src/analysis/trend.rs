use ndarray::Array1;
use serde::Serialize;

use super::{check_aligned, pair_articles};
use crate::annotate::{month_labels, AnnotatedArticle, EntityPair};
use crate::error::{Error, Result};
use crate::model::RelationDistribution;

/// Monthly means of a per-article weight vector for one pair.
///
/// Components are relations for [`trend`] and predicate lemmas for
/// [`tf_baseline_trend`]. Months without articles are `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendSeries {
    pub pair: EntityPair,
    /// Component names, one per vector entry.
    pub components: Vec<String>,
    pub month_labels: Vec<String>,
    pub means: Vec<Option<Array1<f64>>>,
    pub counts: Vec<usize>,
    /// Mean over all of the pair's articles.
    pub overall: Array1<f64>,
}

impl TrendSeries {
    fn from_rows(
        pair: EntityPair,
        components: Vec<String>,
        month_labels: Vec<String>,
        rows: impl Iterator<Item = (usize, Array1<f64>)>,
    ) -> Result<Self> {
        let months = month_labels.len();
        let dim = components.len();
        let mut sums = vec![Array1::<f64>::zeros(dim); months];
        let mut counts = vec![0usize; months];
        let mut overall = Array1::<f64>::zeros(dim);
        let mut n = 0usize;
        for (month, row) in rows {
            sums[month] += &row;
            counts[month] += 1;
            overall += &row;
            n += 1;
        }
        if n == 0 {
            return Err(Error::Undefined(format!(
                "pair {pair} has no article with a distribution"
            )));
        }
        overall /= n as f64;
        let means = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| (c > 0).then(|| s / c as f64))
            .collect();
        Ok(TrendSeries {
            pair,
            components,
            month_labels,
            means,
            counts,
            overall,
        })
    }

    pub fn months(&self) -> usize {
        self.means.len()
    }

    /// One component's value per month.
    pub fn component(&self, k: usize) -> Vec<Option<f64>> {
        self.means.iter().map(|m| m.as_ref().map(|v| v[k])).collect()
    }

    /// The `n` components with the largest overall mean, largest first.
    pub fn top(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.overall.len()).collect();
        idx.sort_by(|&a, &b| self.overall[b].total_cmp(&self.overall[a]).then(a.cmp(&b)));
        idx.truncate(n);
        idx
    }

    /// Multiplies every component by `k`.
    pub fn scaled(&self, k: f64) -> TrendSeries {
        let mut out = self.clone();
        for m in out.means.iter_mut().flatten() {
            *m *= k;
        }
        out.overall *= k;
        out
    }
}

/// Monthly mean relation weights for `pair`. `dists` must be aligned with
/// `corpus`; articles without a distribution are ignored.
pub fn trend(
    corpus: &[AnnotatedArticle],
    dists: &[Option<RelationDistribution>],
    pair: &EntityPair,
) -> Result<TrendSeries> {
    check_aligned(corpus, dists)?;
    let idx = pair_articles(corpus, pair)?;
    let k = dists
        .iter()
        .flatten()
        .map(|d| d.len())
        .next()
        .ok_or_else(|| Error::Undefined("no article has a distribution".into()))?;
    TrendSeries::from_rows(
        pair.clone(),
        (0..k).map(|i| i.to_string()).collect(),
        month_labels(corpus),
        idx.into_iter()
            .filter_map(|i| dists[i].as_ref().map(|d| (corpus[i].month, d.0.clone()))),
    )
}

/// Term-frequency baseline: per article, `count(p) / n_tokens` for every
/// predicate lemma seen with the pair, averaged per month.
pub fn tf_baseline_trend(corpus: &[AnnotatedArticle], pair: &EntityPair) -> Result<TrendSeries> {
    let idx = pair_articles(corpus, pair)?;
    let mut lemmas: Vec<String> = idx
        .iter()
        .flat_map(|&i| corpus[i].predicates.iter().cloned())
        .collect();
    lemmas.sort();
    lemmas.dedup();
    let mut rows = Vec::with_capacity(idx.len());
    for &i in &idx {
        let a = &corpus[i];
        if a.n_tokens == 0 {
            return Err(Error::Input(format!(
                "article {} has no token count",
                a.article_id
            )));
        }
        let mut row = Array1::<f64>::zeros(lemmas.len());
        for p in &a.predicates {
            let j = lemmas.binary_search(p).expect("lemma collected above");
            row[j] += 1.0;
        }
        row /= a.n_tokens as f64;
        rows.push((a.month, row));
    }
    TrendSeries::from_rows(pair.clone(), lemmas, month_labels(corpus), rows.into_iter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn art(id: &str, pair: (&str, &str), month: usize, preds: &[&str], n: usize) -> AnnotatedArticle {
        AnnotatedArticle {
            article_id: id.into(),
            pair: EntityPair::new(pair.0, pair.1).unwrap(),
            month,
            month_label: format!("2016-{:02}", month + 1),
            country: None,
            predicates: preds.iter().map(|s| s.to_string()).collect(),
            nouns: vec![],
            words: vec![],
            n_tokens: n,
        }
    }

    fn ab() -> EntityPair {
        EntityPair::new("A", "B").unwrap()
    }

    #[test]
    fn single_article_month_equals_its_distribution() {
        let corpus = vec![art("x", ("A", "B"), 1, &["p"], 3), art("y", ("A", "C"), 0, &["p"], 3)];
        let d = array![0.2, 0.5, 0.3];
        let dists = vec![Some(RelationDistribution(d.clone())), Some(RelationDistribution(array![1.0, 0.0, 0.0]))];
        let s = trend(&corpus, &dists, &ab()).unwrap();
        assert_eq!(s.months(), 2);
        assert_eq!(s.means[0], None);
        assert_eq!(s.counts, vec![0, 1]);
        assert_eq!(s.means[1].as_ref().unwrap(), &d);
    }

    #[test]
    fn identical_articles_average_to_either() {
        let corpus = vec![art("x", ("A", "B"), 0, &["p"], 3), art("y", ("A", "B"), 0, &["p"], 3)];
        let d = RelationDistribution(array![0.1, 0.9]);
        let s = trend(&corpus, &[Some(d.clone()), Some(d.clone())], &ab()).unwrap();
        assert_abs_diff_eq!(s.means[0].as_ref().unwrap()[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.means[0].as_ref().unwrap()[1], 0.9, epsilon = 1e-15);
    }

    #[test]
    fn random_month_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let corpus: Vec<_> = (0..5).map(|i| art(&format!("a{i}"), ("A", "B"), 0, &["p"], 3)).collect();
        let dists: Vec<_> = (0..5)
            .map(|_| {
                let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = raw.iter().sum();
                Some(RelationDistribution(raw.iter().map(|x| x / s).collect()))
            })
            .collect();
        let s = trend(&corpus, &dists, &ab()).unwrap();
        for k in 0..4 {
            let mut brute = 0.0;
            for d in &dists {
                brute += d.as_ref().unwrap().0[k];
            }
            assert_abs_diff_eq!(s.means[0].as_ref().unwrap()[k], brute / 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn absent_pair_is_an_error() {
        let corpus = vec![art("x", ("A", "C"), 0, &["p"], 3)];
        let dists = vec![Some(RelationDistribution(array![1.0]))];
        assert!(matches!(trend(&corpus, &dists, &ab()), Err(Error::UnknownPair(..))));
        assert!(matches!(tf_baseline_trend(&corpus, &ab()), Err(Error::UnknownPair(..))));
    }

    #[test]
    fn top_orders_by_overall_mean() {
        let corpus = vec![art("x", ("A", "B"), 0, &["p"], 3)];
        let s = trend(&corpus, &[Some(RelationDistribution(array![0.1, 0.6, 0.3]))], &ab()).unwrap();
        assert_eq!(s.top(2), vec![1, 2]);
    }

    #[test]
    fn term_frequency() {
        let corpus = vec![
            art("x", ("A", "B"), 0, &["warn", "warn"], 4),
            art("y", ("A", "B"), 1, &["warn"], 5),
            art("z", ("A", "B"), 1, &["meet"], 2),
        ];
        let s = tf_baseline_trend(&corpus, &ab()).unwrap();
        assert_eq!(s.components, vec!["meet", "warn"]);
        let m0 = s.means[0].as_ref().unwrap();
        assert_abs_diff_eq!(m0[1], 0.5, epsilon = 1e-15);
        assert_eq!(m0[0], 0.0);
        let m1 = s.means[1].as_ref().unwrap();
        assert_abs_diff_eq!(m1[1], (0.2 + 0.0) / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m1[0], (0.0 + 0.5) / 2.0, epsilon = 1e-15);
    }
}
