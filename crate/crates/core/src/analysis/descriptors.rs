use ndarray::{Array1, ArrayView2};
use serde::Serialize;

use super::check_aligned;
use crate::annotate::AnnotatedArticle;
use crate::embeddings::{EmbeddingTable, FrequencyVocab};
use crate::error::{Error, Result};
use crate::model::math::cosine;
use crate::model::RelationDistribution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Descriptor {
    pub relation: usize,
    /// Nearest vocabulary lemmas by cosine, best first.
    pub neighbours: Vec<(String, f64)>,
    /// Mean weight of this relation over all articles.
    pub avg_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescriptorSet {
    pub relations: Vec<Descriptor>,
}

impl DescriptorSet {
    /// Descriptors ordered by descending average weight.
    pub fn by_weight(&self) -> Vec<&Descriptor> {
        let mut v: Vec<&Descriptor> = self.relations.iter().collect();
        v.sort_by(|a, b| b.avg_weight.total_cmp(&a.avg_weight).then(a.relation.cmp(&b.relation)));
        v
    }

    /// First neighbour of relation `k`, if any.
    pub fn head(&self, k: usize) -> Option<&str> {
        self.relations
            .get(k)
            .and_then(|d| d.neighbours.first())
            .map(|(t, _)| t.as_str())
    }
}

/// Labels each row of `relations` with its `top_k` nearest vocabulary
/// lemmas and its mean weight over `dists` (aligned with `corpus`).
pub fn descriptors(
    relations: ArrayView2<'_, f64>,
    vocab: &FrequencyVocab,
    emb: &EmbeddingTable,
    corpus: &[AnnotatedArticle],
    dists: &[Option<RelationDistribution>],
    top_k: usize,
) -> Result<DescriptorSet> {
    if vocab.is_empty() {
        return Err(Error::Input("empty descriptor vocabulary".into()));
    }
    check_aligned(corpus, dists)?;
    if relations.ncols() != emb.dim() {
        return Err(Error::Shape {
            name: "relation embeddings".into(),
            expected: format!("{} columns", emb.dim()),
            found: relations.ncols().to_string(),
        });
    }
    let rows: Vec<(&str, _)> = vocab
        .tokens()
        .map(|t| {
            emb.get(t)
                .map(|v| (t, v))
                .ok_or_else(|| Error::Input(format!("vocabulary token `{t}` has no embedding")))
        })
        .collect::<Result<_>>()?;

    let k = relations.nrows();
    let mut avg = Array1::<f64>::zeros(k);
    let mut n = 0usize;
    for d in dists.iter().flatten() {
        avg += &d.0;
        n += 1;
    }
    if n > 0 {
        avg /= n as f64;
    }

    let relations = (0..k)
        .map(|r| {
            let row = relations.row(r);
            let mut scored: Vec<(String, f64)> = rows
                .iter()
                .map(|(t, v)| (t.to_string(), cosine(row, v.view())))
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            scored.truncate(top_k);
            Descriptor {
                relation: r,
                neighbours: scored,
                avg_weight: avg[r],
            }
        })
        .collect();
    Ok(DescriptorSet { relations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use std::collections::HashMap;

    fn setup() -> (EmbeddingTable, FrequencyVocab) {
        let emb = EmbeddingTable::from_rows([
            ("denounce", vec![1.0, 0.0, 0.0]),
            ("condemn", vec![0.9, 0.1, 0.0]),
            ("praise", vec![0.0, 1.0, 0.0]),
            ("meet", vec![0.0, 0.2, 1.0]),
        ])
        .unwrap();
        let counts: HashMap<String, usize> = [("denounce", 4), ("condemn", 3), ("praise", 2), ("meet", 1)]
            .into_iter()
            .map(|(t, c)| (t.to_string(), c))
            .collect();
        (emb, FrequencyVocab::from_counts(counts, 500, |_| true))
    }

    #[test]
    fn self_nearest_and_scale_invariant() {
        let (emb, vocab) = setup();
        let mut r = Array2::zeros((2, 3));
        r.row_mut(0).assign(&emb.get("denounce").unwrap());
        r.row_mut(1).assign(&array![0.1, 0.3, 0.9]);
        let d = descriptors(r.view(), &vocab, &emb, &[], &[], 5).unwrap();
        assert_eq!(d.head(0), Some("denounce"));
        assert!((d.relations[0].neighbours[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(d.relations[0].neighbours.len(), 4);
        for w in d.relations[0].neighbours.windows(2) {
            assert!(w[0].1 >= w[1].1);
        }
        let mut scaled = r.clone();
        scaled.row_mut(1).mapv_inplace(|x| 2.0 * x);
        let d2 = descriptors(scaled.view(), &vocab, &emb, &[], &[], 5).unwrap();
        let names = |d: &DescriptorSet| -> Vec<String> {
            d.relations[1].neighbours.iter().map(|(t, _)| t.clone()).collect()
        };
        assert_eq!(names(&d), names(&d2));
    }

    #[test]
    fn empty_vocab_rejected() {
        let (emb, _) = setup();
        let r = Array2::zeros((1, 3));
        let empty = FrequencyVocab::from_counts(HashMap::new(), 5, |_| true);
        assert!(matches!(
            descriptors(r.view(), &empty, &emb, &[], &[], 5),
            Err(Error::Input(_))
        ));
    }
}
