//! Post-training analyses over inferred relation distributions.
//!
//! Most functions take the distributions produced by
//! [`Model::infer`](crate::model::Model::infer), aligned with the corpus, so
//! they work for either model. Context words need attention weights and are
//! only defined for the attention model.

mod change;
mod context;
mod descriptors;
mod regional;
mod trend;

pub use change::{
    change_rate, key_event_alignment, load_key_events, macro_alignment, parse_key_events,
    Alignment, ChangeRateReport, KeyEvent,
};
pub use context::{context_words, ContextMatrix, ContextWords, DEFAULT_TOP_FRACTION};
pub use descriptors::{descriptors, Descriptor, DescriptorSet};
pub use regional::{regional_diff, RegionalDiff, RegionalRow};
pub use trend::{tf_baseline_trend, trend, TrendSeries};

use crate::annotate::{AnnotatedArticle, EntityPair};
use crate::error::{Error, Result};

/// Corpus indices of the pair's articles, or an error if it has none.
pub(crate) fn pair_articles(corpus: &[AnnotatedArticle], pair: &EntityPair) -> Result<Vec<usize>> {
    let idx: Vec<usize> = corpus
        .iter()
        .enumerate()
        .filter(|(_, a)| &a.pair == pair)
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::UnknownPair(
            pair.first().to_string(),
            pair.second().to_string(),
        ));
    }
    Ok(idx)
}

pub(crate) fn check_aligned<T>(corpus: &[AnnotatedArticle], dists: &[T]) -> Result<()> {
    if corpus.len() != dists.len() {
        return Err(Error::Shape {
            name: "distributions".into(),
            expected: format!("{} (one per article)", corpus.len()),
            found: dists.len().to_string(),
        });
    }
    Ok(())
}
