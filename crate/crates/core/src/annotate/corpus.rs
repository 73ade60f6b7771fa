use std::collections::{BTreeMap, BTreeSet};

use super::conllu::{ParsedSentence, YearMonth};
use super::extract::{detect_entities, extract_nouns, extract_predicates};
use super::lexicon::{AliasMap, AntonymLexicon};
use super::{AnnotatedArticle, EntityPair};
use crate::error::{Error, Result};

#[derive(Default)]
struct Draft {
    month: Option<YearMonth>,
    country: Option<String>,
    predicates: Vec<String>,
    nouns: Vec<String>,
    words: Vec<String>,
    n_tokens: usize,
}

/// Groups pair-mentioning sentences into one article per (document, pair).
///
/// `entities` restricts which entities are tracked; an empty slice tracks all
/// entities of the alias map. Nouns come from pair sentences that yield at
/// least one predicate. Articles without predicates are dropped. Month
/// indices follow the sorted distinct months of the whole input.
pub fn build_corpus<I>(
    sentences: I,
    aliases: &AliasMap,
    antonyms: &AntonymLexicon,
    entities: &[String],
) -> Result<BTreeMap<EntityPair, Vec<AnnotatedArticle>>>
where
    I: IntoIterator<Item = ParsedSentence>,
{
    for e in entities {
        if !aliases.contains_entity(e) {
            return Err(Error::Config(format!("entity `{e}` has no aliases")));
        }
    }
    let tracked: BTreeSet<&str> = if entities.is_empty() {
        aliases.entities().collect()
    } else {
        entities.iter().map(String::as_str).collect()
    };

    let mut months = BTreeSet::new();
    let mut drafts: BTreeMap<(String, EntityPair), Draft> = BTreeMap::new();
    let mut doc_months: BTreeMap<String, YearMonth> = BTreeMap::new();

    for sentence in sentences {
        months.insert(sentence.month);
        match doc_months.get(&sentence.doc_id) {
            Some(m) if *m != sentence.month => {
                return Err(Error::Input(format!(
                    "document {} has sentences in {} and {}",
                    sentence.doc_id, m, sentence.month
                )))
            }
            _ => {
                doc_months.insert(sentence.doc_id.clone(), sentence.month);
            }
        }

        let found: Vec<String> = detect_entities(&sentence, aliases)
            .into_iter()
            .filter(|e| tracked.contains(e.as_str()))
            .collect();
        if found.len() < 2 {
            continue;
        }
        let predicates = extract_predicates(&sentence, antonyms)?;
        let nouns = if predicates.is_empty() {
            Vec::new()
        } else {
            extract_nouns(&sentence)
        };
        let words: Vec<String> = sentence
            .tokens
            .iter()
            .filter(|t| !t.is_punct())
            .map(|t| t.lemma.clone())
            .collect();

        for i in 0..found.len() {
            for j in i + 1..found.len() {
                let pair = EntityPair::new(found[i].clone(), found[j].clone())?;
                let d = drafts.entry((sentence.doc_id.clone(), pair)).or_default();
                d.month = Some(sentence.month);
                if d.country.is_none() {
                    d.country = sentence.country.clone();
                }
                d.predicates.extend(predicates.iter().cloned());
                d.nouns.extend(nouns.iter().cloned());
                d.words.extend(words.iter().cloned());
                d.n_tokens += sentence.tokens.len();
            }
        }
    }

    let month_index: BTreeMap<YearMonth, usize> =
        months.into_iter().enumerate().map(|(i, m)| (m, i)).collect();

    let mut out: BTreeMap<EntityPair, Vec<AnnotatedArticle>> = BTreeMap::new();
    for ((doc_id, pair), d) in drafts {
        if d.predicates.is_empty() {
            continue;
        }
        let month = d.month.expect("draft always has a month");
        out.entry(pair.clone()).or_default().push(AnnotatedArticle {
            article_id: doc_id,
            pair,
            month: month_index[&month],
            month_label: month.to_string(),
            country: d.country,
            predicates: d.predicates,
            nouns: d.nouns,
            words: d.words,
            n_tokens: d.n_tokens,
        });
    }
    for articles in out.values_mut() {
        articles.sort_by(|a, b| (a.month, &a.article_id).cmp(&(b.month, &b.article_id)));
    }
    Ok(out)
}
