use std::collections::BTreeMap;

use ndarray::Array1;
use serde::Serialize;

use super::{check_aligned, pair_articles};
use crate::annotate::{AnnotatedArticle, EntityPair};
use crate::error::{Error, Result};
use crate::model::RelationDistribution;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionalRow {
    pub relation: usize,
    /// Mean weight in each of the two regions.
    pub weights: [f64; 2],
    /// `weights[0] − weights[1]`.
    pub difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionalDiff {
    pub pair: EntityPair,
    pub regions: [String; 2],
    pub articles: [usize; 2],
    /// Sorted by descending absolute difference.
    pub rows: Vec<RegionalRow>,
}

/// Mean relation weights of `pair` in two regions, by article country.
/// With `regions` unset the two regions with the most articles are used
/// (ties broken by name).
pub fn regional_diff(
    corpus: &[AnnotatedArticle],
    dists: &[Option<RelationDistribution>],
    pair: &EntityPair,
    regions: Option<(&str, &str)>,
) -> Result<RegionalDiff> {
    check_aligned(corpus, dists)?;
    let mut by_region: BTreeMap<&str, (Array1<f64>, usize)> = BTreeMap::new();
    for i in pair_articles(corpus, pair)? {
        let (Some(country), Some(d)) = (corpus[i].country.as_deref(), dists[i].as_ref()) else {
            continue;
        };
        let e = by_region
            .entry(country)
            .or_insert_with(|| (Array1::zeros(d.len()), 0));
        e.0 += &d.0;
        e.1 += 1;
    }
    let (a, b) = match regions {
        Some((a, b)) => {
            if a == b {
                return Err(Error::Config("regions must differ".into()));
            }
            for r in [a, b] {
                if !by_region.contains_key(r) {
                    return Err(Error::Input(format!("no articles for {pair} from region `{r}`")));
                }
            }
            (a, b)
        }
        None => {
            let mut ranked: Vec<(&str, usize)> = by_region.iter().map(|(r, v)| (*r, v.1)).collect();
            if ranked.len() < 2 {
                return Err(Error::Input(format!(
                    "{pair} has articles from {} region(s); need 2",
                    ranked.len()
                )));
            }
            ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
            (ranked[0].0, ranked[1].0)
        }
    };
    let mean = |r: &str| {
        let (s, n) = &by_region[r];
        (s / *n as f64, *n)
    };
    let (ma, na) = mean(a);
    let (mb, nb) = mean(b);
    let mut rows: Vec<RegionalRow> = (0..ma.len())
        .map(|k| RegionalRow {
            relation: k,
            weights: [ma[k], mb[k]],
            difference: ma[k] - mb[k],
        })
        .collect();
    rows.sort_by(|x, y| {
        y.difference
            .abs()
            .total_cmp(&x.difference.abs())
            .then(x.relation.cmp(&y.relation))
    });
    Ok(RegionalDiff {
        pair: pair.clone(),
        regions: [a.to_string(), b.to_string()],
        articles: [na, nb],
        rows,
    })
}
