//! Span disambiguation by trie-constrained decoding.
//!
//! Stand-in for a generative linker: the "model" is the candidate prior
//! distribution spelled out character by character. The score of emitting a
//! symbol after a prefix is `ln(mass(prefix + symbol) / mass(prefix))`, where
//! the mass of a prefix is the summed prior of the candidates that start with
//! it, so a complete id scores `ln(prior / total)`. A wide enough beam
//! therefore recovers the prior argmax; narrow beams can be led astray by a
//! heavy prefix, as generative decoders are.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::spans::{resolve_overlaps, span_candidates};
use super::{constrained_beam_decode, LinkError, Linker, Tokenization};
use crate::candidates::{build_trie, Candidate, CandidatePolicy, EntityTrie, TrieSymbol};
use crate::model::{Annotation, CharIndex};

/// A candidate trie with prior mass attached to every node.
#[derive(Debug)]
pub struct PriorTrie {
    trie: EntityTrie,
    mass: Vec<f64>,
    terminal: Vec<f64>,
}

impl PriorTrie {
    pub fn new(candidates: &[Candidate]) -> Self {
        let trie = build_trie(candidates.iter().map(|c| &c.entity));
        let mut mass = vec![0.0; trie.node_count()];
        let mut terminal = vec![0.0; trie.node_count()];
        for c in candidates {
            let mut node = EntityTrie::ROOT;
            mass[node] += c.prior;
            for ch in c.entity.as_str().chars() {
                node = trie.child(node, ch).expect("inserted above");
                mass[node] += c.prior;
            }
            terminal[node] = c.prior;
        }
        Self { trie, mass, terminal }
    }

    pub fn trie(&self) -> &EntityTrie {
        &self.trie
    }

    pub fn step_score(&self, prefix: &str, symbol: TrieSymbol) -> f64 {
        let Some(node) = self.trie.node(prefix) else {
            return f64::NEG_INFINITY;
        };
        let next = match symbol {
            TrieSymbol::End => self.terminal[node],
            TrieSymbol::Char(c) => self.trie.child(node, c).map_or(0.0, |n| self.mass[n]),
        };
        (next / self.mass[node]).ln()
    }
}

/// Decodes each candidate-bearing span's entity with beam search over the
/// trie of its candidates, then resolves overlaps like the argmax linker.
#[derive(Debug)]
pub struct ConstrainedDecodingLinker {
    pub policy: CandidatePolicy,
    pub max_span_tokens: usize,
    pub beam_width: usize,
    pub tokenization: Tokenization,
    // keyed by the address of the shared candidate list
    tries: Mutex<HashMap<usize, Arc<PriorTrie>>>,
}

impl ConstrainedDecodingLinker {
    pub fn new(policy: CandidatePolicy, max_span_tokens: usize, beam_width: usize) -> Self {
        Self { policy, max_span_tokens, beam_width, tokenization: Tokenization::Conll, tries: Mutex::default() }
    }

    fn prior_trie(&self, candidates: &Arc<[Candidate]>) -> Arc<PriorTrie> {
        let key = candidates.as_ptr() as usize;
        let mut cache = self.tries.lock().unwrap_or_else(|e| e.into_inner());
        Arc::clone(cache.entry(key).or_insert_with(|| Arc::new(PriorTrie::new(candidates))))
    }
}

impl Linker for ConstrainedDecodingLinker {
    fn name(&self) -> &str {
        "constrained"
    }

    fn link(&self, text: &str) -> Result<Vec<Annotation>, LinkError> {
        let tokens = self.tokenization.tokenize(text);
        let index = CharIndex::new(text);
        let mut proposals = Vec::new();
        for (_, _, span, set) in span_candidates(&index, &tokens, &self.policy, self.max_span_tokens) {
            let prior_trie = self.prior_trie(&set.candidates);
            let entity =
                constrained_beam_decode(|p, s| prior_trie.step_score(p, s), prior_trie.trie(), self.beam_width)?;
            if !entity.is_none() {
                proposals.push(Annotation::new(span, entity));
            }
        }
        Ok(resolve_overlaps(proposals))
    }
}
