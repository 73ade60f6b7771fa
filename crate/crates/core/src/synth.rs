//! Synthetic corpora with planted relation clusters, mixture switches and
//! regional skews, plus the matching embeddings and ground truth.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::annotate::{AnnotatedArticle, EntityPair, YearMonth};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// A mixture that holds from month `start` until the next segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub mixture: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSpec {
    pub entities: [String; 2],
    pub segments: Vec<Segment>,
}

/// Moves a share `amount` of every mixture onto `cluster`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Skew {
    pub cluster: usize,
    pub amount: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    /// Probability that an article comes from this region.
    pub share: f64,
    #[serde(default)]
    pub skew: Option<Skew>,
}

fn default_lemmas() -> usize {
    6
}
fn default_nouns() -> usize {
    8
}
fn default_fillers() -> usize {
    40
}
fn default_dim() -> usize {
    50
}
fn default_noise() -> f64 {
    0.2
}
fn default_start() -> YearMonth {
    YearMonth::new(2016, 1).expect("valid month")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Number of planted relation clusters.
    pub clusters: usize,
    #[serde(default = "default_lemmas")]
    pub lemmas_per_cluster: usize,
    #[serde(default = "default_nouns")]
    pub nouns_per_cluster: usize,
    #[serde(default = "default_fillers")]
    pub fillers: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Norm of the perturbation added to a centroid for each word.
    #[serde(default = "default_noise")]
    pub noise: f64,
    pub months: usize,
    #[serde(default = "default_start")]
    pub start_month: YearMonth,
    /// Articles per pair and month.
    pub articles_per_month: usize,
    pub pairs: Vec<PairSpec>,
    #[serde(default)]
    pub regions: Vec<RegionSpec>,
    #[serde(default)]
    pub seed: u64,
}

fn check_simplex(m: &[f64], k: usize, what: &str) -> Result<()> {
    if m.len() != k {
        return Err(Error::Config(format!("{what} has {} weights for {k} clusters", m.len())));
    }
    if m.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || (m.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{what} is not a probability vector")));
    }
    Ok(())
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.clusters == 0 || self.lemmas_per_cluster == 0 || self.nouns_per_cluster == 0 {
            return Err(Error::Config("clusters, lemmas and nouns must be positive".into()));
        }
        if 2 * self.clusters + 1 > self.dim {
            return Err(Error::Config(format!(
                "infeasible geometry: {} clusters need dimension at least {}, got {}",
                self.clusters,
                2 * self.clusters + 1,
                self.dim
            )));
        }
        if !(self.noise >= 0.0 && self.noise < 0.4) {
            return Err(Error::Config("noise must lie in [0, 0.4)".into()));
        }
        if self.months == 0 || self.articles_per_month == 0 || self.pairs.is_empty() {
            return Err(Error::Config("months, articles per month and pairs must be non-empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.pairs {
            let pair = EntityPair::new(&p.entities[0], &p.entities[1])?;
            if !seen.insert(pair.clone()) {
                return Err(Error::Config(format!("pair {pair} listed twice")));
            }
            let Some(first) = p.segments.first() else {
                return Err(Error::Config(format!("pair {pair} has no mixture")));
            };
            if first.start != 0 {
                return Err(Error::Config(format!("pair {pair}: first segment must start at month 0")));
            }
            for w in p.segments.windows(2) {
                if w[1].start <= w[0].start {
                    return Err(Error::Config(format!("pair {pair}: segments out of order")));
                }
            }
            for s in &p.segments {
                if s.start >= self.months {
                    return Err(Error::Config(format!(
                        "pair {pair}: event month {} outside 0..{}",
                        s.start, self.months
                    )));
                }
                check_simplex(&s.mixture, self.clusters, &format!("pair {pair} mixture"))?;
            }
        }
        if !self.regions.is_empty() {
            if self.regions.iter().any(|r| !(r.share > 0.0)) {
                return Err(Error::Config("region shares must be positive".into()));
            }
            if (self.regions.iter().map(|r| r.share).sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config("region shares must sum to 1".into()));
            }
            for r in &self.regions {
                if let Some(s) = &r.skew {
                    if s.cluster >= self.clusters || !(0.0..=1.0).contains(&s.amount) {
                        return Err(Error::Config(format!("bad skew for region {}", r.name)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Mixture of a pair at a month, before any regional skew.
    pub fn mixture(&self, pair: usize, month: usize) -> &[f64] {
        let segs = &self.pairs[pair].segments;
        let i = segs.partition_point(|s| s.start <= month) - 1;
        &segs[i].mixture
    }
}

/// Everything needed to score a model trained on the generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Predicate lemmas per cluster, most frequent by construction first.
    pub clusters: Vec<Vec<String>>,
    pub noun_pools: Vec<Vec<String>>,
    pub pairs: Vec<PairTruth>,
    /// Cluster each article's predicates came from.
    pub article_clusters: BTreeMap<String, usize>,
    pub month_labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTruth {
    pub pair: EntityPair,
    /// Unskewed mixture per month.
    pub mixtures: Vec<Vec<f64>>,
    /// Months where the mixture changes.
    pub event_months: Vec<usize>,
}

impl GroundTruth {
    pub fn cluster_of(&self, lemma: &str) -> Option<usize> {
        self.clusters.iter().position(|c| c.iter().any(|l| l == lemma))
    }

    pub fn pair(&self, pair: &EntityPair) -> Option<&PairTruth> {
        self.pairs.iter().find(|p| &p.pair == pair)
    }
}

impl PairTruth {
    /// The planted mixtures in the shape analyses consume.
    pub fn mixture_series(&self) -> Vec<Option<Array1<f64>>> {
        self.mixtures
            .iter()
            .map(|m| Some(Array1::from(m.clone())))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub corpus: Vec<AnnotatedArticle>,
    pub embeddings: EmbeddingTable,
    pub truth: GroundTruth,
}

/// `n` orthonormal rows in `dim` dimensions, from Gaussian draws.
fn orthonormal<R: Rng>(n: usize, dim: usize, rng: &mut R) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((n, dim));
    for i in 0..n {
        loop {
            let mut v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            for j in 0..i {
                let p = m.row(j).dot(&v);
                v.scaled_add(-p, &m.row(j));
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-6 {
                m.row_mut(i).assign(&(v / norm));
                break;
            }
        }
    }
    m
}

fn perturbed<R: Rng>(centroid: ndarray::ArrayView1<'_, f64>, noise: f64, rng: &mut R) -> Vec<f64> {
    let scale = noise / (centroid.len() as f64).sqrt();
    centroid
        .iter()
        .map(|&c| c + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Generates a corpus, embeddings and ground truth. Deterministic in the
/// spec (including its seed).
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let k = spec.clusters;

    let clusters: Vec<Vec<String>> = (0..k)
        .map(|c| (0..spec.lemmas_per_cluster).map(|j| format!("rel{c}_pred{j}")).collect())
        .collect();
    let noun_pools: Vec<Vec<String>> = (0..k)
        .map(|c| (0..spec.nouns_per_cluster).map(|j| format!("rel{c}_noun{j}")).collect())
        .collect();
    let fillers: Vec<String> = (0..spec.fillers).map(|j| format!("filler{j}")).collect();

    let centroids = orthonormal(2 * k, spec.dim, &mut rng);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for c in 0..k {
        for l in &clusters[c] {
            rows.push((l.clone(), perturbed(centroids.row(c), spec.noise, &mut rng)));
        }
        for n in &noun_pools[c] {
            rows.push((n.clone(), perturbed(centroids.row(k + c), spec.noise, &mut rng)));
        }
    }
    for f in &fillers {
        let v: Array1<f64> = (0..spec.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.dot(&v).sqrt().max(1e-12);
        rows.push((f.clone(), (v / norm).to_vec()));
    }
    let embeddings = EmbeddingTable::from_rows(rows)?;

    let zipf = WeightedIndex::new((1..=spec.lemmas_per_cluster).map(|r| 1.0 / r as f64))
        .expect("positive weights");
    let region_pick = (!spec.regions.is_empty())
        .then(|| WeightedIndex::new(spec.regions.iter().map(|r| r.share)).expect("validated shares"));

    let labels: Vec<String> = (0..spec.months)
        .map(|m| spec.start_month.plus_months(m).to_string())
        .collect();

    let mut order: Vec<usize> = (0..spec.pairs.len()).collect();
    let pairs: Vec<EntityPair> = spec
        .pairs
        .iter()
        .map(|p| EntityPair::new(&p.entities[0], &p.entities[1]))
        .collect::<Result<_>>()?;
    order.sort_by(|&a, &b| pairs[a].cmp(&pairs[b]));

    let mut corpus = Vec::new();
    let mut article_clusters = BTreeMap::new();
    let mut truth_pairs = Vec::new();
    for &p in &order {
        let pair = &pairs[p];
        for month in 0..spec.months {
            let base = spec.mixture(p, month);
            for n in 0..spec.articles_per_month {
                let region = region_pick.as_ref().map(|w| &spec.regions[w.sample(&mut rng)]);
                let mixture: Vec<f64> = match region.and_then(|r| r.skew.as_ref()) {
                    Some(s) => base
                        .iter()
                        .enumerate()
                        .map(|(c, &w)| (1.0 - s.amount) * w + if c == s.cluster { s.amount } else { 0.0 })
                        .collect(),
                    None => base.to_vec(),
                };
                let c = WeightedIndex::new(&mixture).expect("validated mixture").sample(&mut rng);
                let n_preds = rng.gen_range(1..=3);
                let predicates: Vec<String> =
                    (0..n_preds).map(|_| clusters[c][zipf.sample(&mut rng)].clone()).collect();
                let n_nouns = rng.gen_range(2..=4);
                let nouns: Vec<String> = (0..n_nouns)
                    .map(|_| noun_pools[c][rng.gen_range(0..spec.nouns_per_cluster)].clone())
                    .collect();
                let mut words: Vec<String> = predicates.iter().chain(&nouns).cloned().collect();
                if !fillers.is_empty() {
                    for _ in 0..rng.gen_range(2..=5) {
                        words.push(fillers[rng.gen_range(0..fillers.len())].clone());
                    }
                }
                let id = format!("{}-{}-{:03}-{:04}", pair.first(), pair.second(), month, n);
                article_clusters.insert(id.clone(), c);
                corpus.push(AnnotatedArticle {
                    article_id: id,
                    pair: pair.clone(),
                    month,
                    month_label: labels[month].clone(),
                    country: region.map(|r| r.name.clone()),
                    n_tokens: words.len() + 2,
                    predicates,
                    nouns,
                    words,
                });
            }
        }
        truth_pairs.push(PairTruth {
            pair: pair.clone(),
            mixtures: (0..spec.months).map(|m| spec.mixture(p, m).to_vec()).collect(),
            event_months: spec.pairs[p].segments.iter().skip(1).map(|s| s.start).collect(),
        });
    }

    Ok(SynthOutput {
        corpus,
        embeddings,
        truth: GroundTruth {
            clusters,
            noun_pools,
            pairs: truth_pairs,
            article_clusters,
            month_labels: labels,
        },
    })
}
