//! Building blocks for black-box entity linking evaluation.
//!
//! * [`model`]: documents, character spans, annotations, InKB filtering.
//! * [`corpus`]: CoNLL/AIDA corpus parsing and text reconstruction.
//! * [`adapters`]: tokenization, document splitting and merging, subword
//!   offset conversion.
//! * [`candidates`]: alias dictionaries, full-vocabulary and empty candidate
//!   regimes, entity tries.
//! * [`linkers`]: reference linkers (prior argmax, coherence re-ranking,
//!   constrained decoding, token merging).
//! * [`evaluation`]: strong-match InKB micro P/R/F1 and error analysis.
//!
//! Embedding and scoring code is generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix the common choices.

pub mod adapters;
pub mod candidates;
pub mod corpus;
pub mod evaluation;
pub mod linkers;
pub mod model;
pub mod scalar;

pub use candidates::{AliasDictionary, CandidatePolicy, CandidateSet, EntityTrie, FullVocabulary, PolicyMode};
pub use corpus::{ColumnLayout, Corpus};
pub use evaluation::{EvaluationReport, MatchCounts, MatchResult};
pub use linkers::{LinkError, Linker};
pub use model::{AnnotatedDocument, Annotation, EntityId, Span, TokenSpan, Vocabulary};
pub use scalar::Scalar;

pub type EmbeddingTable32 = linkers::EmbeddingTable<f32>;
pub type EmbeddingTable64 = linkers::EmbeddingTable<f64>;
pub type CoherenceParams32 = linkers::CoherenceParams<f32>;
pub type CoherenceParams64 = linkers::CoherenceParams<f64>;
pub type CoherenceLinker32 = linkers::CoherenceLinker<f32>;
pub type CoherenceLinker64 = linkers::CoherenceLinker<f64>;
