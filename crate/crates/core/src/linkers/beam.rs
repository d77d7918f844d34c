use std::cmp::Ordering;

use super::LinkError;
use crate::candidates::{EntityTrie, TrieSymbol};
use crate::model::EntityId;
use crate::scalar::Scalar;

struct Hypothesis<T> {
    text: String,
    /// `None` once the end symbol has been emitted.
    node: Option<usize>,
    score: T,
}

/// Best first; equal scores go to the smaller text, finished before
/// unfinished.
fn rank<T: Scalar>(a: &Hypothesis<T>, b: &Hypothesis<T>) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.text.cmp(&b.text))
        .then_with(|| a.node.is_some().cmp(&b.node.is_some()))
}

fn sanitize<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        T::neg_infinity()
    } else {
        x
    }
}

/// Beam search over entity-id characters where every expansion must follow
/// the trie. `score_next(prefix, symbol)` gives the additive score of
/// emitting `symbol` after `prefix`. Each step keeps the `beam_width` best
/// expansions; expansions that emit the end symbol retire into the finished
/// pool. The best finished hypothesis is returned, so the result is always a
/// trie member.
pub fn constrained_beam_decode<T, F>(
    mut score_next: F,
    trie: &EntityTrie,
    beam_width: usize,
) -> Result<EntityId, LinkError>
where
    T: Scalar,
    F: FnMut(&str, TrieSymbol) -> T,
{
    if trie.is_empty() {
        return Err(LinkError::EmptyTrie);
    }
    let beam_width = beam_width.max(1);
    let mut active = vec![Hypothesis { text: String::new(), node: Some(EntityTrie::ROOT), score: T::zero() }];
    let mut finished: Vec<Hypothesis<T>> = Vec::new();

    while !active.is_empty() {
        let mut expansions = Vec::new();
        for hyp in &active {
            let node = hyp.node.expect("active hypotheses are unfinished");
            for symbol in trie.symbols_at(node) {
                let step = sanitize(score_next(&hyp.text, symbol));
                let score = sanitize(hyp.score + step);
                match symbol {
                    TrieSymbol::End => expansions.push(Hypothesis { text: hyp.text.clone(), node: None, score }),
                    TrieSymbol::Char(c) => {
                        let mut text = hyp.text.clone();
                        text.push(c);
                        expansions.push(Hypothesis { text, node: trie.child(node, c), score });
                    }
                }
            }
        }
        expansions.sort_by(rank);
        expansions.truncate(beam_width);
        active = Vec::with_capacity(expansions.len());
        for hyp in expansions {
            if hyp.node.is_some() {
                active.push(hyp);
            } else {
                finished.push(hyp);
            }
        }
    }

    finished.sort_by(rank);
    let best = finished.into_iter().next().ok_or(LinkError::EmptyTrie)?;
    Ok(EntityId::new(best.text)?)
}
