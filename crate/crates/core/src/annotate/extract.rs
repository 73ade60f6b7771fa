//! Sentence-level evidence: entity mentions, verbal predicates and nouns.

use std::collections::BTreeSet;

use super::conllu::ParsedSentence;
use super::lexicon::{AliasMap, AntonymLexicon};
use crate::error::Result;

const SUBJECT_DEPS: &[&str] = &["nsubj", "nsubjpass", "nsubj:pass"];
const OBJECT_DEPS: &[&str] = &["dobj", "obj", "attr", "dative", "iobj"];
const NEGATION_LEMMAS: &[&str] = &["not", "n't", "never"];

/// All entity ids with at least one alias in the sentence.
pub fn detect_entities(sentence: &ParsedSentence, aliases: &AliasMap) -> BTreeSet<String> {
    let surfaces: Vec<&str> = sentence.tokens.iter().map(|t| t.surface.as_str()).collect();
    let mut found = BTreeSet::new();
    for i in 0..surfaces.len() {
        for e in aliases.matches_at(&surfaces, i) {
            found.insert(e.to_string());
        }
    }
    found
}

fn base_dep(dep: &str) -> &str {
    dep.split(':').next().unwrap_or(dep)
}

fn has_object(sentence: &ParsedSentence, verb: usize) -> bool {
    sentence.children(verb).any(|c| {
        let dep = sentence.tokens[c].deprel.as_str();
        if OBJECT_DEPS.contains(&dep) || base_dep(dep) == "obl" {
            return true;
        }
        // spaCy style prepositional object: verb -prep-> preposition -pobj-> noun
        dep == "prep"
            && sentence
                .children(c)
                .any(|g| sentence.tokens[g].deprel == "pobj")
    })
}

fn is_negated(sentence: &ParsedSentence, verb: usize) -> bool {
    sentence.children(verb).any(|c| {
        let t = &sentence.tokens[c];
        t.deprel == "neg"
            || (t.deprel == "advmod" && NEGATION_LEMMAS.contains(&t.lemma.to_lowercase().as_str()))
    })
}

/// Lemmas of verbs that have both a subject and an object dependent.
///
/// A negated verb is replaced by its antonym when the lexicon has one and is
/// dropped otherwise.
pub fn extract_predicates(
    sentence: &ParsedSentence,
    antonyms: &AntonymLexicon,
) -> Result<Vec<String>> {
    sentence.validate()?;
    let mut out = Vec::new();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if tok.upos != "VERB" && tok.upos != "AUX" {
            continue;
        }
        let has_subject = sentence
            .children(i)
            .any(|c| SUBJECT_DEPS.contains(&sentence.tokens[c].deprel.as_str()));
        if !has_subject || !has_object(sentence, i) {
            continue;
        }
        if is_negated(sentence, i) {
            if let Some(ant) = antonyms.get(&tok.lemma) {
                out.push(ant.to_string());
            }
        } else {
            out.push(tok.lemma.clone());
        }
    }
    Ok(out)
}

/// Lemmas of NOUN and PROPN tokens in surface order, duplicates kept.
pub fn extract_nouns(sentence: &ParsedSentence) -> Vec<String> {
    sentence
        .tokens
        .iter()
        .filter(|t| t.upos == "NOUN" || t.upos == "PROPN")
        .map(|t| t.lemma.clone())
        .collect()
}
