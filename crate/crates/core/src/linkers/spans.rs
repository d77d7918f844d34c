use std::cmp::Reverse;

use super::{LinkError, Linker, Tokenization};
use crate::candidates::{candidates_for, CandidatePolicy, CandidateSet};
use crate::model::{Annotation, CharIndex, Span, TokenSpan};

/// Longest mention considered, in tokens.
pub const DEFAULT_MAX_SPAN_TOKENS: usize = 5;

/// Every contiguous token window `(start, length)` with `1 <= length <= n`,
/// ordered by start then length.
pub fn enumerate_windows(token_count: usize, n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for start in 0..token_count {
        for len in 1..=n.min(token_count - start) {
            out.push((start, len));
        }
    }
    out
}

/// Character spans of every window of up to `n` tokens.
pub fn enumerate_spans(tokens: &[TokenSpan], n: usize) -> Vec<Span> {
    enumerate_windows(tokens.len(), n)
        .into_iter()
        .map(|(s, l)| Span { begin: tokens[s].span.begin, end: tokens[s + l - 1].span.end })
        .collect()
}

/// Candidate sets for every enumerated span that has at least one candidate.
pub(super) fn span_candidates(
    index: &CharIndex<'_>,
    tokens: &[TokenSpan],
    policy: &CandidatePolicy,
    n: usize,
) -> Vec<(usize, usize, Span, CandidateSet)> {
    enumerate_windows(tokens.len(), n)
        .into_iter()
        .filter_map(|(s, l)| {
            let span = Span { begin: tokens[s].span.begin, end: tokens[s + l - 1].span.end };
            let surface = index.slice(span)?;
            let set = candidates_for(surface, policy);
            (!set.is_empty()).then_some((s, l, span, set))
        })
        .collect()
}

/// Greedy overlap resolution: longer spans first, then earlier start, then
/// smaller entity id. Output is sorted.
pub fn resolve_overlaps(mut proposals: Vec<Annotation>) -> Vec<Annotation> {
    proposals.sort_by(|a, b| {
        (Reverse(a.span.len()), a.span.begin, &a.entity).cmp(&(Reverse(b.span.len()), b.span.begin, &b.entity))
    });
    let mut kept: Vec<Annotation> = Vec::new();
    for p in proposals {
        if kept.iter().all(|k| !k.span.overlaps(&p.span)) {
            kept.push(p);
        }
    }
    kept.sort();
    kept
}

/// Prior argmax over pre-tokenized text.
pub fn link_prior_argmax_tokens(
    text: &str,
    tokens: &[TokenSpan],
    policy: &CandidatePolicy,
    n: usize,
) -> Vec<Annotation> {
    let index = CharIndex::new(text);
    let proposals = span_candidates(&index, tokens, policy, n)
        .into_iter()
        .filter_map(|(_, _, span, set)| {
            let best = set.best()?;
            // a None argmax means "not a mention"
            (!best.entity.is_none()).then(|| Annotation::new(span, best.entity.clone()))
        })
        .collect();
    resolve_overlaps(proposals)
}

/// Tokenize, enumerate spans of up to `n` tokens, keep spans with candidates,
/// pick the highest-prior candidate of each and resolve overlaps.
pub fn link_prior_argmax(text: &str, policy: &CandidatePolicy, n: usize) -> Vec<Annotation> {
    link_prior_argmax_tokens(text, &Tokenization::Conll.tokenize(text), policy, n)
}

#[derive(Debug, Clone)]
pub struct PriorArgmaxLinker {
    pub policy: CandidatePolicy,
    pub max_span_tokens: usize,
    pub tokenization: Tokenization,
}

impl PriorArgmaxLinker {
    pub fn new(policy: CandidatePolicy, max_span_tokens: usize) -> Self {
        Self { policy, max_span_tokens, tokenization: Tokenization::Conll }
    }

    pub fn with_tokenization(mut self, tokenization: Tokenization) -> Self {
        self.tokenization = tokenization;
        self
    }
}

impl Linker for PriorArgmaxLinker {
    fn name(&self) -> &str {
        "prior_argmax"
    }

    fn link(&self, text: &str) -> Result<Vec<Annotation>, LinkError> {
        let tokens = self.tokenization.tokenize(text);
        Ok(link_prior_argmax_tokens(text, &tokens, &self.policy, self.max_span_tokens))
    }
}
