//! Frozen word vectors in whitespace-separated text format and
//! frequency-ranked predicate vocabularies.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::annotate::AnnotatedArticle;
use crate::error::{Error, Result};

/// Token to vector map. Tokens are stored lowercased and lookups are
/// case-folded.
#[derive(Clone, Debug)]
pub struct EmbeddingTable {
    vectors: Array2<f64>,
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` rows. Later duplicates of a
    /// case-folded token are ignored.
    pub fn from_rows<I, S>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut tokens = Vec::new();
        let mut index = HashMap::new();
        let mut data = Vec::new();
        let mut dim = None;
        for (token, vector) in rows {
            let d = *dim.get_or_insert(vector.len());
            if vector.len() != d || d == 0 {
                return Err(Error::Input(format!(
                    "vector for `{}` has dimension {}, expected {}",
                    token.as_ref(),
                    vector.len(),
                    d
                )));
            }
            let key = token.as_ref().to_lowercase();
            if index.contains_key(&key) {
                continue;
            }
            index.insert(key.clone(), tokens.len());
            tokens.push(key);
            data.extend(vector);
        }
        let dim = dim.ok_or_else(|| Error::Input("no embeddings".into()))?;
        let vectors = Array2::from_shape_vec((tokens.len(), dim), data)
            .expect("row lengths checked above");
        Ok(EmbeddingTable {
            vectors,
            index,
            tokens,
        })
    }

    pub fn read<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut rows = Vec::new();
        let mut dim = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else {
                continue;
            };
            let vector = parts
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::parse(path, i + 1, format!("bad component: {e}")))?;
            let d = *dim.get_or_insert(vector.len());
            if vector.is_empty() || vector.len() != d {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {} components, found {}", d, vector.len()),
                ));
            }
            rows.push((token.to_string(), vector));
        }
        if rows.is_empty() {
            return Err(Error::parse(path, 0, "empty embedding file"));
        }
        Self::from_rows(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(f), path)
    }

    /// Writes the table in the text format `read` accepts. Floats use the
    /// shortest representation that round-trips.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (token, row) in self.tokens.iter().zip(self.vectors.rows()) {
            w.write_all(token.as_bytes())?;
            for v in row {
                write!(w, " {v:?}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index
            .get(token)
            .or_else(|| self.index.get(&token.to_lowercase()))
            .copied()
    }

    pub fn get(&self, token: &str) -> Option<ArrayView1<'_, f64>> {
        self.index_of(token).map(|i| self.vectors.row(i))
    }

    pub fn row(&self, idx: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(idx)
    }
}

/// Tokens with counts, sorted by descending count then token.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FrequencyVocab {
    entries: Vec<(String, usize)>,
}

impl FrequencyVocab {
    /// Ranks `counts`, keeping only tokens accepted by `keep`, truncated to `k`.
    pub fn from_counts<F>(counts: HashMap<String, usize>, k: usize, keep: F) -> Self
    where
        F: Fn(&str) -> bool,
    {
        let mut entries: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c > 0 && keep(t))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(k);
        FrequencyVocab { entries }
    }

    pub fn entries(&self) -> &[(String, usize)] {
        &self.entries
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Corpus-wide lowercase counts of the tokens produced by `field`.
pub fn count_tokens<'a, F>(corpus: &'a [AnnotatedArticle], field: F) -> HashMap<String, usize>
where
    F: Fn(&'a AnnotatedArticle) -> &'a [String],
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    for a in corpus {
        for t in field(a) {
            *counts.entry(t.to_lowercase()).or_default() += 1;
        }
    }
    counts
}

/// The `k` most frequent predicate lemmas across the whole corpus that have
/// an embedding.
pub fn top_k_predicates(
    corpus: &[AnnotatedArticle],
    emb: &EmbeddingTable,
    k: usize,
) -> FrequencyVocab {
    let counts = count_tokens(corpus, |a| &a.predicates);
    FrequencyVocab::from_counts(counts, k, |t| emb.index_of(t).is_some())
}

/// The `k` most frequent words (any position) with an embedding.
pub fn top_k_words(corpus: &[AnnotatedArticle], emb: &EmbeddingTable, k: usize) -> FrequencyVocab {
    let counts = count_tokens(corpus, |a| &a.words);
    FrequencyVocab::from_counts(counts, k, |t| emb.index_of(t).is_some())
}
