use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::spans::span_candidates;
use super::{LinkError, Linker, Tokenization};
use crate::candidates::{CandidatePolicy, FullVocabulary};
use crate::model::{Annotation, CharIndex, EntityId, Span, TokenSpan};

/// Scored entity guesses for one token; the *None* entity stands for "not
/// part of a mention".
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPrediction {
    pub token_index: usize,
    pub top_k: Vec<(EntityId, f64)>,
}

impl TokenPrediction {
    /// Sorts entries by descending score (ties to the smaller id). At least
    /// one entry is required.
    pub fn new(token_index: usize, mut top_k: Vec<(EntityId, f64)>) -> Result<Self, LinkError> {
        if top_k.is_empty() {
            return Err(LinkError::EmptyPrediction(token_index));
        }
        top_k.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(Self { token_index, top_k })
    }

    pub fn abstain(token_index: usize) -> Self {
        Self { token_index, top_k: vec![(EntityId::none(), 1.0)] }
    }
}

/// The entities a policy allows at each token position.
#[derive(Debug, Clone)]
pub enum TokenCandidates {
    /// Dictionary mode: union of the candidate sets of every span of up to
    /// `n` tokens that covers the token.
    PerToken(Vec<HashSet<EntityId>>),
    Vocabulary(Arc<FullVocabulary>),
    Nothing,
}

impl TokenCandidates {
    pub fn from_policy(text: &str, tokens: &[TokenSpan], policy: &CandidatePolicy, n: usize) -> Self {
        match policy {
            CandidatePolicy::Dictionary(_) => {
                let index = CharIndex::new(text);
                let mut sets = vec![HashSet::new(); tokens.len()];
                for (start, len, _, set) in span_candidates(&index, tokens, policy, n) {
                    for slot in &mut sets[start..start + len] {
                        slot.extend(set.candidates.iter().map(|c| c.entity.clone()));
                    }
                }
                TokenCandidates::PerToken(sets)
            }
            CandidatePolicy::FullVocabulary(v) => TokenCandidates::Vocabulary(Arc::clone(v)),
            CandidatePolicy::Empty => TokenCandidates::Nothing,
        }
    }

    pub fn allows(&self, token: usize, entity: &EntityId) -> bool {
        if entity.is_none() {
            return true;
        }
        match self {
            TokenCandidates::PerToken(sets) => sets.get(token).is_some_and(|s| s.contains(entity)),
            TokenCandidates::Vocabulary(v) => v.entities().contains(entity),
            TokenCandidates::Nothing => false,
        }
    }
}

/// Filters each token's guesses by the allowed candidates, takes the best
/// survivor, and merges maximal runs of adjacent tokens sharing the same
/// non-None entity into one annotation.
pub fn merge_token_predictions_with(
    predictions: &[TokenPrediction],
    tokens: &[TokenSpan],
    candidates: &TokenCandidates,
) -> Result<Vec<Annotation>, LinkError> {
    if predictions.len() != tokens.len() {
        return Err(LinkError::LengthMismatch { predictions: predictions.len(), tokens: tokens.len() });
    }
    let mut out = Vec::new();
    let mut run: Option<(Span, EntityId)> = None;
    for (i, (pred, token)) in predictions.iter().zip(tokens).enumerate() {
        let best = pred.top_k.iter().find(|(e, _)| candidates.allows(i, e)).map(|(e, _)| e).filter(|e| !e.is_none());
        match (best, run.as_mut()) {
            (Some(e), Some((span, current))) if current == e => span.end = token.span.end,
            (Some(e), _) => {
                if let Some((span, entity)) = run.take() {
                    out.push(Annotation::new(span, entity));
                }
                run = Some((token.span, e.clone()));
            }
            (None, _) => {
                if let Some((span, entity)) = run.take() {
                    out.push(Annotation::new(span, entity));
                }
            }
        }
    }
    if let Some((span, entity)) = run {
        out.push(Annotation::new(span, entity));
    }
    Ok(out)
}

/// [`merge_token_predictions_with`] using the candidates `policy` allows,
/// with dictionary candidates gathered from spans of up to `n` tokens.
pub fn merge_token_predictions(
    text: &str,
    tokens: &[TokenSpan],
    predictions: &[TokenPrediction],
    policy: &CandidatePolicy,
    n: usize,
) -> Result<Vec<Annotation>, LinkError> {
    let candidates = TokenCandidates::from_policy(text, tokens, policy, n);
    merge_token_predictions_with(predictions, tokens, &candidates)
}

/// Per-token predictions derived from candidate priors: a token's score for
/// an entity is the best prior that entity has on any candidate-bearing span
/// of up to `n` tokens covering the token. *None* is always offered with
/// `none_score`.
#[derive(Debug, Clone)]
pub struct PriorTokenScorer {
    pub policy: CandidatePolicy,
    pub max_span_tokens: usize,
    pub top_k: usize,
    pub none_score: f64,
}

impl PriorTokenScorer {
    pub fn predict(&self, text: &str, tokens: &[TokenSpan]) -> Vec<TokenPrediction> {
        let index = CharIndex::new(text);
        let mut scores: Vec<HashMap<EntityId, f64>> = vec![HashMap::new(); tokens.len()];
        let k = self.top_k.max(1);
        for (start, len, _, set) in span_candidates(&index, tokens, &self.policy, self.max_span_tokens) {
            // a span's k best candidates are enough for every token's top k
            for c in set.candidates.iter().take(k) {
                for slot in &mut scores[start..start + len] {
                    let s = slot.entry(c.entity.clone()).or_insert(c.prior);
                    *s = s.max(c.prior);
                }
            }
        }
        scores
            .into_iter()
            .enumerate()
            .map(|(i, map)| {
                let mut entries: Vec<(EntityId, f64)> = map.into_iter().collect();
                entries.push((EntityId::none(), self.none_score));
                let mut pred = TokenPrediction::new(i, entries).expect("None entry is always present");
                pred.top_k.truncate(k);
                pred
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TokenMergeLinker {
    pub scorer: PriorTokenScorer,
    pub tokenization: Tokenization,
}

impl TokenMergeLinker {
    pub fn new(policy: CandidatePolicy, max_span_tokens: usize) -> Self {
        Self {
            scorer: PriorTokenScorer { policy, max_span_tokens, top_k: 5, none_score: 0.0 },
            tokenization: Tokenization::Conll,
        }
    }
}

impl Linker for TokenMergeLinker {
    fn name(&self) -> &str {
        "token_merge"
    }

    fn link(&self, text: &str) -> Result<Vec<Annotation>, LinkError> {
        let tokens = self.tokenization.tokenize(text);
        let predictions = self.scorer.predict(text, &tokens);
        merge_token_predictions(text, &tokens, &predictions, &self.scorer.policy, self.scorer.max_span_tokens)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::tokenize;
    use crate::candidates::AliasDictionary;
    use proptest::prelude::*;

    fn eid(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn pred(i: usize, entries: &[(&str, f64)]) -> TokenPrediction {
        TokenPrediction::new(i, entries.iter().map(|(e, s)| (eid(e), *s)).collect()).unwrap()
    }

    fn all_vocab(ids: &[&str]) -> TokenCandidates {
        TokenCandidates::Vocabulary(Arc::new(FullVocabulary::new(ids.iter().map(|s| eid(s))).unwrap()))
    }

    #[test]
    fn new_york_merges() {
        let tokens = tokenize("New York");
        let preds = vec![pred(0, &[("NY_CITY", 0.9)]), pred(1, &[("NY_CITY", 0.8), ("YORK", 0.1)])];
        let out = merge_token_predictions_with(&preds, &tokens, &all_vocab(&["NY_CITY", "YORK"])).unwrap();
        assert_eq!(out, vec![Annotation::new(Span { begin: 0, end: 8 }, eid("NY_CITY"))]);
    }

    #[test]
    fn all_none_gives_nothing() {
        let tokens = tokenize("a b c");
        let preds: Vec<TokenPrediction> = (0..3).map(TokenPrediction::abstain).collect();
        assert!(merge_token_predictions_with(&preds, &tokens, &all_vocab(&["A"])).unwrap().is_empty());
    }

    #[test]
    fn different_entities_split_runs() {
        let tokens = tokenize("Japan Syria");
        let preds = vec![pred(0, &[("J", 0.9)]), pred(1, &[("S", 0.9)])];
        let out = merge_token_predictions_with(&preds, &tokens, &all_vocab(&["J", "S"])).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn length_mismatch() {
        let tokens = tokenize("a b");
        assert!(matches!(
            merge_token_predictions_with(&[TokenPrediction::abstain(0)], &tokens, &TokenCandidates::Nothing),
            Err(LinkError::LengthMismatch { predictions: 1, tokens: 2 })
        ));
        assert!(TokenPrediction::new(0, vec![]).is_err());
    }

    #[test]
    fn dictionary_filter_drops_unlisted_entities() {
        let d = AliasDictionary::from_entries([("Japan".to_string(), eid("J_NT"), 0.5)]).unwrap();
        let policy = CandidatePolicy::Dictionary(Arc::new(d));
        let text = "Japan won";
        let tokens = tokenize(text);
        // model prefers an entity outside the candidate set; the filter falls back to J_NT
        let preds = vec![pred(0, &[("J_COUNTRY", 0.9), ("J_NT", 0.5)]), pred(1, &[("J_NT", 0.4)])];
        let out = merge_token_predictions(text, &tokens, &preds, &policy, 5).unwrap();
        assert_eq!(out, vec![Annotation::new(Span { begin: 0, end: 5 }, eid("J_NT"))]);
        assert!(merge_token_predictions(text, &tokens, &preds, &CandidatePolicy::Empty, 5).unwrap().is_empty());
    }

    #[test]
    fn linker_end_to_end() {
        let d = AliasDictionary::from_entries([
            ("New York".to_string(), eid("NYC"), 0.9),
            ("Japan".to_string(), eid("JAPAN"), 0.8),
        ])
        .unwrap();
        let linker = TokenMergeLinker::new(CandidatePolicy::Dictionary(Arc::new(d)), 5);
        let out = linker.link("Japan visits New York .").unwrap();
        assert_eq!(
            out,
            vec![
                Annotation::new(Span { begin: 0, end: 5 }, eid("JAPAN")),
                Annotation::new(Span { begin: 13, end: 21 }, eid("NYC")),
            ]
        );
    }

    proptest! {
        #[test]
        fn merged_annotations_never_overlap(choices in prop::collection::vec(0usize..4, 0..30)) {
            let text = vec!["w"; choices.len()].join(" ");
            let tokens = tokenize(&text);
            let names = ["A", "B", "C", "--NME--"];
            let preds: Vec<TokenPrediction> =
                choices.iter().enumerate().map(|(i, c)| pred(i, &[(names[*c], 1.0)])).collect();
            let out = merge_token_predictions_with(&preds, &tokens, &all_vocab(&["A", "B", "C"])).unwrap();
            for pair in out.windows(2) {
                prop_assert!(pair[0].span.end <= pair[1].span.begin);
                prop_assert!(pair[0].span.end < pair[1].span.begin || pair[0].entity != pair[1].entity);
            }
        }
    }
}
