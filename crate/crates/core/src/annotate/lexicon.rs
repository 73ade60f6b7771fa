use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

fn tsv_pairs<R: BufRead>(reader: R, path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (a, b) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected two tab-separated fields"))?;
        let (a, b) = (a.trim(), b.trim());
        if a.is_empty() || b.is_empty() || b.contains('\t') {
            return Err(Error::parse(path, i + 1, "expected two non-empty fields"));
        }
        out.push((i + 1, a.to_string(), b.to_string()));
    }
    Ok(out)
}

/// Entity id to alias surface strings. Matching is case-sensitive; an alias
/// containing spaces matches a contiguous run of tokens.
#[derive(Clone, Debug, Default)]
pub struct AliasMap {
    entries: BTreeMap<String, Vec<String>>,
    // first alias token -> (entity, full alias token sequence)
    index: HashMap<String, Vec<(String, Vec<String>)>>,
}

impl AliasMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: &str, alias: &str) -> Result<()> {
        let parts: Vec<String> = alias.split_whitespace().map(str::to_string).collect();
        if parts.is_empty() {
            return Err(Error::Config(format!("empty alias for {entity}")));
        }
        if let Some(owner) = self.entity_of(&parts) {
            if owner != entity {
                return Err(Error::Config(format!(
                    "alias `{alias}` maps to both {owner} and {entity}"
                )));
            }
            return Ok(());
        }
        self.entries
            .entry(entity.to_string())
            .or_default()
            .push(alias.to_string());
        self.index
            .entry(parts[0].clone())
            .or_default()
            .push((entity.to_string(), parts));
        Ok(())
    }

    fn entity_of(&self, parts: &[String]) -> Option<&str> {
        self.index
            .get(&parts[0])?
            .iter()
            .find(|(_, seq)| seq == parts)
            .map(|(e, _)| e.as_str())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut map = AliasMap::new();
        for (entity, alias) in pairs {
            map.insert(entity, alias)?;
        }
        Ok(map)
    }

    /// Reads `entity<TAB>alias` lines.
    pub fn from_tsv<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut map = AliasMap::new();
        for (line, entity, alias) in tsv_pairs(reader, path)? {
            map.insert(&entity, &alias)
                .map_err(|e| Error::parse(path, line, e.to_string()))?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_tsv(std::io::BufReader::new(f), path)
    }

    pub fn contains_entity(&self, entity: &str) -> bool {
        self.entries.contains_key(entity)
    }

    pub fn entities(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn aliases(&self, entity: &str) -> Option<&[String]> {
        self.entries.get(entity).map(Vec::as_slice)
    }

    /// Entities whose alias starts at token `i` of `surfaces`.
    pub(crate) fn matches_at<'a>(
        &'a self,
        surfaces: &'a [&str],
        i: usize,
    ) -> impl Iterator<Item = &'a str> + 'a {
        self.index
            .get(surfaces[i])
            .into_iter()
            .flatten()
            .filter(move |(_, seq)| {
                i + seq.len() <= surfaces.len()
                    && seq.iter().zip(&surfaces[i..]).all(|(a, b)| a == b)
            })
            .map(|(e, _)| e.as_str())
    }
}

/// Lemma to antonym lemma, used to rewrite negated predicates.
#[derive(Clone, Debug, Default)]
pub struct AntonymLexicon {
    map: HashMap<String, String>,
}

impl AntonymLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lemma: &str, antonym: &str) {
        self.map.insert(lemma.to_string(), antonym.to_string());
    }

    pub fn get(&self, lemma: &str) -> Option<&str> {
        self.map.get(lemma).map(String::as_str)
    }

    pub fn from_tsv<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let mut lex = AntonymLexicon::new();
        for (_, lemma, antonym) in tsv_pairs(reader, path)? {
            lex.insert(&lemma, &antonym);
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::from_tsv(std::io::BufReader::new(f), path)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alias_conflict_is_rejected() {
        let mut m = AliasMap::new();
        m.insert("US", "Trump").unwrap();
        m.insert("US", "Trump").unwrap();
        assert!(m.insert("Russia", "Trump").is_err());
        assert_eq!(m.aliases("US").unwrap(), ["Trump".to_string()]);
    }

    #[test]
    fn tsv_loading() {
        let tsv = "# aliases\nUS\tU.S.\nUS\tTrump\nChina\tXi\n\nUK\tGreat Britain\n";
        let m = AliasMap::from_tsv(tsv.as_bytes(), Path::new("a.tsv")).unwrap();
        assert_eq!(m.entities().collect::<Vec<_>>(), vec!["China", "UK", "US"]);
        let toks = ["in", "Great", "Britain"];
        assert_eq!(m.matches_at(&toks, 1).collect::<Vec<_>>(), vec!["UK"]);
        assert_eq!(m.matches_at(&toks, 2).count(), 0);

        let bad = "US U.S.\n";
        let err = AliasMap::from_tsv(bad.as_bytes(), Path::new("a.tsv")).unwrap_err();
        assert!(err.to_string().starts_with("a.tsv:1:"));
    }

    #[test]
    fn antonyms() {
        let lex = AntonymLexicon::from_tsv("support\toppose\n".as_bytes(), Path::new("x")).unwrap();
        assert_eq!(lex.get("support"), Some("oppose"));
        assert_eq!(lex.get("oppose"), None);
    }
}
