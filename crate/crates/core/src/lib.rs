//! Unsupervised relation embeddings between entity pairs.
//!
//! The toolkit turns dependency-parsed, time-stamped news text into
//! per-pair article records ([`annotate`]), learns a small set of relation
//! embeddings that reconstruct each article's verbal predicates as a convex
//! combination ([`model`], [`training`]), and derives interpretable outputs
//! from the learned distributions ([`analysis`]): nearest-predicate relation
//! descriptors, monthly trends, a change-rate metric aligned against key
//! events, attention-ranked context nouns and regional coverage gaps.
//!
//! [`synth`] generates corpora with planted ground truth so every stage can
//! be verified without a licensed news corpus.

pub mod analysis;
pub mod annotate;
pub mod embeddings;
mod error;
pub mod model;
pub mod synth;
pub mod training;

pub use annotate::{AnnotatedArticle, EntityPair};
pub use embeddings::{EmbeddingTable, FrequencyVocab};
pub use error::{Error, Result};
pub use model::{ModelConfig, ModelParams, RelationDistribution};
pub use training::{LossBreakdown, TrainConfig};
