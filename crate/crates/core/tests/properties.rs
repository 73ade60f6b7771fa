use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relnet::analysis::change_rate;
use relnet::annotate::{
    build_corpus, read_corpus, write_corpus, AliasMap, AntonymLexicon, ParsedSentence, Token,
};
use relnet::model::math::softmax;
use relnet::model::{forward, PreparedArticle};
use relnet::training::{hinge_loss, orthogonality_penalty};
use relnet::{AnnotatedArticle, EmbeddingTable, EntityPair, FrequencyVocab, ModelConfig, ModelParams};

const NAMES: [&str; 4] = ["Trump", "Putin", "Xi", "Macron"];
const VERBS: [&str; 4] = ["meet", "support", "criticize", "call"];

fn aliases() -> AliasMap {
    AliasMap::from_pairs([
        ("US", "Trump"),
        ("Russia", "Putin"),
        ("China", "Xi"),
        ("France", "Macron"),
    ])
    .unwrap()
}

/// subject, verb, object and an optional conjoined object.
fn doc(id: usize, month: u32, parts: (usize, usize, usize, Option<usize>)) -> ParsedSentence {
    let (s, v, o, extra) = parts;
    let mut tokens = vec![
        Token::new(NAMES[s], NAMES[s], "PROPN", 2, "nsubj"),
        Token::new(VERBS[v], VERBS[v], "VERB", 0, "ROOT"),
        Token::new(NAMES[o], NAMES[o], "PROPN", 2, "dobj"),
    ];
    if let Some(e) = extra {
        tokens.push(Token::new("and", "and", "CCONJ", 5, "cc"));
        tokens.push(Token::new(NAMES[e], NAMES[e], "PROPN", 3, "conj"));
    }
    ParsedSentence {
        doc_id: format!("doc{id}"),
        month: format!("2017-{month:02}").parse().unwrap(),
        country: Some(if id % 2 == 0 { "US" } else { "GB" }.into()),
        tokens,
    }
}

fn docs() -> impl Strategy<Value = Vec<ParsedSentence>> {
    prop::collection::vec(
        (1u32..=4, 0usize..4, 0usize..4, 0usize..4, prop::option::of(0usize..4)),
        1..12,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (m, s, verb, o, e))| doc(i, m, (s, verb, o, e)))
            .collect()
    })
}

fn random_table(seed: u64, tokens: &[String], dim: usize) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingTable::from_rows(
        tokens
            .iter()
            .map(|t| (t.clone(), (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>())),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_ignores_document_order(sentences in docs(), seed in any::<u64>()) {
        let mut shuffled = sentences.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let lex = AntonymLexicon::new();
        let a = build_corpus(sentences, &aliases(), &lex, &[]).unwrap();
        let b = build_corpus(shuffled, &aliases(), &lex, &[]).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn pairs_are_canonical_and_distinct(sentences in docs()) {
        let corpus = build_corpus(sentences, &aliases(), &AntonymLexicon::new(), &[]).unwrap();
        for (pair, arts) in &corpus {
            prop_assert!(pair.first() < pair.second());
            for a in arts {
                prop_assert_eq!(&a.pair, pair);
                prop_assert!(!a.predicates.is_empty());
            }
        }
    }

    #[test]
    fn corpus_jsonl_round_trips(sentences in docs()) {
        let corpus = build_corpus(sentences, &aliases(), &AntonymLexicon::new(), &[]).unwrap();
        let flat: Vec<AnnotatedArticle> = corpus.into_values().flatten().collect();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &flat).unwrap();
        let back = read_corpus(buf.as_slice(), Path::new("c.jsonl")).unwrap();
        prop_assert_eq!(back, flat);
    }

    #[test]
    fn softmax_is_shift_invariant(
        logits in prop::collection::vec(-30.0f64..30.0, 1..20),
        shift in -100.0f64..100.0,
    ) {
        let x = Array1::from(logits);
        let p = softmax(x.view());
        let q = softmax((&x + shift).view());
        prop_assert!((p.sum() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!(*a >= 0.0);
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_outputs_are_distributions(seed in any::<u64>(), n_nouns in 0usize..5, k in 1usize..6) {
        let d = 6;
        let tokens: Vec<String> = ["p0", "p1", "p2", "n0", "n1", "n2", "n3", "n4"]
            .iter().map(|s| s.to_string()).collect();
        let emb = random_table(seed, &tokens, d);
        let config = ModelConfig {
            relations: k,
            word_dim: d,
            entity_dim: 3,
            months: 2,
            attention_dim: d + 2,
            final_dim: 5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let pair = EntityPair::new("A", "B").unwrap();
        let params = ModelParams::init(config, vec!["A".into(), "B".into()], vec![pair.clone()], &mut rng).unwrap();
        let article = AnnotatedArticle {
            article_id: "a".into(),
            pair,
            month: 1,
            month_label: "2017-02".into(),
            country: None,
            predicates: vec!["p0".into(), "p2".into()],
            nouns: (0..n_nouns).map(|i| format!("n{i}")).collect(),
            words: Vec::new(),
            n_tokens: 4,
        };
        let art = PreparedArticle::new(&article, &params, &emb).unwrap().unwrap();
        let fp = forward(&params, &art, &emb, None);
        prop_assert_eq!(fp.dist.len(), k);
        prop_assert!(fp.dist.iter().all(|&x| x >= 0.0));
        prop_assert!((fp.dist.sum() - 1.0).abs() < 1e-9);
        prop_assert_eq!(fp.alpha.len(), n_nouns);
        if n_nouns > 0 {
            prop_assert!(fp.alpha.iter().all(|&x| x >= 0.0));
            prop_assert!((fp.alpha.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn change_rate_ignores_common_scaling(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 8..16),
        exp in -8i32..8,
        scale in 0.01f64..100.0,
        window in 1usize..5,
    ) {
        let means: Vec<Option<Array1<f64>>> = rows.iter().map(|r| Some(Array1::from(r.clone()))).collect();
        let top = [0, 1, 2];
        let base = change_rate(&means, &top, window).unwrap();
        // a power of two scales every intermediate exactly
        let p2 = 2f64.powi(exp);
        let exact: Vec<_> = means.iter().map(|m| m.as_ref().map(|v| v * p2)).collect();
        prop_assert_eq!(&change_rate(&exact, &top, window).unwrap().delta, &base.delta);
        let any: Vec<_> = means.iter().map(|m| m.as_ref().map(|v| v * scale)).collect();
        for (a, b) in change_rate(&any, &top, window).unwrap().delta.iter().zip(&base.delta) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0)),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn frequency_vocab_is_nested(counts in prop::collection::hash_map("[a-f]{1,3}", 0usize..20, 0..30), k in 0usize..30) {
        let small = FrequencyVocab::from_counts(counts.clone(), k, |_| true);
        let large = FrequencyVocab::from_counts(counts, k + 1, |_| true);
        prop_assert!(small.len() <= k);
        prop_assert_eq!(small.entries(), &large.entries()[..small.len()]);
        for w in large.entries().windows(2) {
            prop_assert!(w[0].1 >= w[1].1);
        }
    }

    #[test]
    fn embeddings_round_trip(seed in any::<u64>(), n in 1usize..10, dim in 1usize..12) {
        let tokens: Vec<String> = (0..n).map(|i| format!("w{i}")).collect();
        let table = random_table(seed, &tokens, dim);
        let mut buf = Vec::new();
        table.write(&mut buf).unwrap();
        let back = EmbeddingTable::read(buf.as_slice(), Path::new("e.txt")).unwrap();
        prop_assert_eq!(back.tokens(), table.tokens());
        for i in 0..n {
            prop_assert_eq!(back.row(i), table.row(i));
        }
    }

    #[test]
    fn hinge_ignores_negative_order(seed in any::<u64>(), n_neg in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vec = |rng: &mut ChaCha8Rng| Array1::from_iter((0..5).map(|_| rng.gen_range(-1.0..1.0)));
        let recon = vec(&mut rng);
        let label = vec(&mut rng);
        let negs: Vec<Array1<f64>> = (0..n_neg).map(|_| vec(&mut rng)).collect();
        let views: Vec<_> = negs.iter().map(|n| n.view()).collect();
        let mut rev = views.clone();
        rev.reverse();
        let a = hinge_loss(recon.view(), label.view(), &views);
        let b = hinge_loss(recon.view(), label.view(), &rev);
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-12);
        let same = vec![label.view(); n_neg];
        let c = hinge_loss(recon.view(), label.view(), &same);
        prop_assert!((c - n_neg as f64).abs() < 1e-12);
    }

    #[test]
    fn orthogonality_penalty_nonnegative_and_zero_on_identity(k in 1usize..6, extra in 0usize..4, seed in any::<u64>()) {
        let mut eye = Array2::<f64>::zeros((k, k + extra));
        for i in 0..k {
            eye[[i, i]] = 1.0;
        }
        prop_assert!(orthogonality_penalty(eye.view()) == 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = Array2::from_shape_fn((k, k + extra), |_| rng.gen_range(-1.0..1.0));
        prop_assert!(orthogonality_penalty(r.view()) >= 0.0);
    }
}

#[test]
fn vocab_keep_filter_applies_before_truncation() {
    let counts: HashMap<String, usize> = [("a", 5), ("b", 4), ("c", 3)]
        .into_iter()
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    let v = FrequencyVocab::from_counts(counts, 2, |t| t != "a");
    let got: Vec<&str> = v.tokens().collect();
    assert_eq!(got, ["b", "c"]);
}
