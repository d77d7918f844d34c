//! Reference entity linkers.
//!
//! Small, deterministic implementations of the classical pipeline pieces:
//! n-gram span enumeration with alias-dictionary candidates and prior argmax,
//! prior + embedding + context-coherence re-ranking, trie-constrained beam
//! decoding, and merging of per-token entity predictions into spans.
//!
//! Ties are always broken towards the lexicographically smallest entity id;
//! overlapping span decisions are resolved longest span first, then earliest
//! start, then entity id.

mod beam;
mod coherence;
mod constrained;
mod spans;
mod token_merge;

use thiserror::Error;

use crate::adapters::{merge_segment_annotations, split_document, tokenize, tokenize_whitespace, AdapterError};
use crate::model::{char_len, Annotation, ModelError, TokenSpan};

pub use beam::constrained_beam_decode;
pub use coherence::{
    coherence_score, link_coherence_rerank, load_embeddings, rerank_candidates, CoherenceLinker, CoherenceParams,
    EmbeddingTable, ScoredCandidate, SquareMatrix, DEFAULT_CONTEXT_WINDOW,
};
pub use constrained::{ConstrainedDecodingLinker, PriorTrie};
pub use spans::{
    enumerate_spans, enumerate_windows, link_prior_argmax, link_prior_argmax_tokens, resolve_overlaps,
    PriorArgmaxLinker, DEFAULT_MAX_SPAN_TOKENS,
};
pub use token_merge::{
    merge_token_predictions, merge_token_predictions_with, PriorTokenScorer, TokenCandidates, TokenMergeLinker,
    TokenPrediction,
};

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{predictions} token predictions for {tokens} tokens")]
    LengthMismatch { predictions: usize, tokens: usize },
    #[error("cannot decode from an empty trie")]
    EmptyTrie,
    #[error("token prediction for token {0} has no entries")]
    EmptyPrediction(usize),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

/// How a linker turns raw text into words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Tokenization {
    /// The CoNLL-style tokenization adapter.
    #[default]
    Conll,
    /// Bare whitespace splitting, i.e. no tokenization adapter.
    Whitespace,
}

impl Tokenization {
    pub fn tokenize(self, text: &str) -> Vec<TokenSpan> {
        match self {
            Tokenization::Conll => tokenize(text),
            Tokenization::Whitespace => tokenize_whitespace(text),
        }
    }
}

/// A linker that annotates one piece of raw text. Implementations hold only
/// immutable state and may be shared across threads.
pub trait Linker: Send + Sync {
    fn name(&self) -> &str;

    fn link(&self, text: &str) -> Result<Vec<Annotation>, LinkError>;
}

/// The adapter chain used in front of every linker: split into segments of
/// at most `max_tokens` tokens, link each segment, shift results back.
pub fn link_with_segments(linker: &dyn Linker, text: &str, max_tokens: usize) -> Result<Vec<Annotation>, LinkError> {
    let segments = split_document(text, max_tokens);
    let per_segment = segments.iter().map(|s| linker.link(&s.text)).collect::<Result<Vec<_>, _>>()?;
    Ok(merge_segment_annotations(&segments, &per_segment, char_len(text))?)
}
