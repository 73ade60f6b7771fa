//! Turning dependency-parsed sentences into per-pair article records.

mod conllu;
mod corpus;
mod extract;
mod lexicon;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use conllu::{parse_conllu, read_conllu_dir, ParsedSentence, Token, YearMonth};
pub use corpus::build_corpus;
pub use extract::{detect_entities, extract_nouns, extract_predicates};
pub use lexicon::{AliasMap, AntonymLexicon};

use crate::error::{Error, Result};

/// Unordered entity pair stored in canonical (lexicographic) order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(String, String)", into = "(String, String)")]
pub struct EntityPair(String, String);

impl EntityPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> Result<Self> {
        let (a, b) = (a.into(), b.into());
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(EntityPair(a, b)),
            std::cmp::Ordering::Greater => Ok(EntityPair(b, a)),
            std::cmp::Ordering::Equal => Err(Error::Input(format!(
                "entity pair needs two distinct entities, got ({a}, {b})"
            ))),
        }
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }
}

impl TryFrom<(String, String)> for EntityPair {
    type Error = Error;

    fn try_from((a, b): (String, String)) -> Result<Self> {
        if a >= b {
            return Err(Error::Input(format!(
                "entity pair ({a}, {b}) is not in canonical order"
            )));
        }
        Ok(EntityPair(a, b))
    }
}

impl From<EntityPair> for (String, String) {
    fn from(p: EntityPair) -> Self {
        (p.0, p.1)
    }
}

impl fmt::Display for EntityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

/// Parses `A,B` (either order).
impl FromStr for EntityPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::Input(format!("expected `A,B` entity pair, found `{s}`")))?;
        EntityPair::new(a.trim(), b.trim())
    }
}

/// One article's evidence for one entity pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedArticle {
    pub article_id: String,
    pub pair: EntityPair,
    /// Month index into the corpus-wide month list.
    pub month: usize,
    pub month_label: String,
    #[serde(default)]
    pub country: Option<String>,
    /// Verbal predicate lemmas from sentences mentioning both entities.
    pub predicates: Vec<String>,
    /// NOUN/PROPN lemmas from the same sentences.
    pub nouns: Vec<String>,
    /// Every non-punctuation lemma of the pair sentences.
    #[serde(default)]
    pub words: Vec<String>,
    /// Token count of the pair sentences, punctuation included.
    #[serde(default)]
    pub n_tokens: usize,
}

pub fn write_corpus<W: Write>(mut w: W, articles: &[AnnotatedArticle]) -> Result<()> {
    for a in articles {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus<R: BufRead>(reader: R, path: &Path) -> Result<Vec<AnnotatedArticle>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let a: AnnotatedArticle =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        if a.predicates.is_empty() {
            return Err(Error::parse(path, i + 1, "article without predicates"));
        }
        out.push(a);
    }
    Ok(out)
}

pub fn load_corpus(path: &Path) -> Result<Vec<AnnotatedArticle>> {
    let f = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(f), path)
}

pub fn save_corpus(path: &Path, articles: &[AnnotatedArticle]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_corpus(std::io::BufWriter::new(f), articles)
}

/// Articles grouped by pair, keeping corpus order within each group.
pub fn group_by_pair(articles: &[AnnotatedArticle]) -> BTreeMap<EntityPair, Vec<usize>> {
    let mut map: BTreeMap<EntityPair, Vec<usize>> = BTreeMap::new();
    for (i, a) in articles.iter().enumerate() {
        map.entry(a.pair.clone()).or_default().push(i);
    }
    map
}

/// Number of months spanned by the corpus (largest month index + 1).
pub fn month_count(articles: &[AnnotatedArticle]) -> usize {
    articles.iter().map(|a| a.month + 1).max().unwrap_or(0)
}

/// Month index to label. Indices with no article get an empty label.
pub fn month_labels(articles: &[AnnotatedArticle]) -> Vec<String> {
    let mut labels = vec![String::new(); month_count(articles)];
    for a in articles {
        if labels[a.month].is_empty() {
            labels[a.month] = a.month_label.clone();
        }
    }
    labels
}
