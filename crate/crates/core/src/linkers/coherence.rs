//! Prior + embedding similarity + local context coherence re-ranking.
//!
//! The coherence term is the bilinear sum `Σ_w β(w) · x_wᵀ B x_w` over the
//! context words `w` that have an embedding. As written it does not depend
//! on the candidate entity, so it shifts every candidate's score by the same
//! amount; the entity argument is kept so the signature matches the usual
//! ψ(entity, context) shape.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read};

use super::spans::{resolve_overlaps, span_candidates};
use super::{LinkError, Linker, Tokenization};
use crate::candidates::{CandidatePolicy, CandidateSet};
use crate::model::{Annotation, CharIndex, EntityId, TokenSpan};
use crate::scalar::Scalar;

/// Tokens of context taken on each side of a mention.
pub const DEFAULT_CONTEXT_WINDOW: usize = 25;

/// Word and entity vectors sharing one key space.
#[derive(Debug, Clone)]
pub struct EmbeddingTable<T> {
    dimension: usize,
    vectors: HashMap<String, Vec<T>>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dimension: usize) -> Self {
        Self { dimension, vectors: HashMap::new() }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<T>) -> Result<(), LinkError> {
        if vector.len() != self.dimension {
            return Err(LinkError::DimensionMismatch { expected: self.dimension, found: vector.len() });
        }
        self.vectors.insert(key.into(), vector);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&[T]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    fn mean_of<'a>(&self, words: impl Iterator<Item = &'a str>) -> Option<Vec<T>> {
        let mut acc = vec![T::zero(); self.dimension];
        let mut count = 0usize;
        for w in words {
            if let Some(v) = self.get(w) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a = *a + *x;
                }
                count += 1;
            }
        }
        if count == 0 {
            return None;
        }
        let n = T::from_f64(count as f64);
        Some(acc.into_iter().map(|a| a / n).collect())
    }
}

/// Reads `key<TAB>v1 v2 ... vd` lines. The dimension is fixed by the first
/// vector; blank and `#` lines are skipped.
pub fn load_embeddings<T: Scalar, R: Read>(input: R) -> Result<EmbeddingTable<T>, LinkError> {
    let mut table: Option<EmbeddingTable<T>> = None;
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let malformed = |reason: String| LinkError::MalformedLine { line: i + 1, reason };
        let (key, values) = line.split_once('\t').ok_or_else(|| malformed("missing tab after key".into()))?;
        let vector = values
            .split(' ')
            .filter(|v| !v.is_empty())
            .map(|v| v.parse::<T>().map_err(|_| malformed(format!("bad component {v:?}"))))
            .collect::<Result<Vec<T>, _>>()?;
        if vector.is_empty() {
            return Err(malformed("empty vector".into()));
        }
        table.get_or_insert_with(|| EmbeddingTable::new(vector.len())).insert(key, vector)?;
    }
    Ok(table.unwrap_or_else(|| EmbeddingTable::new(1)))
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![T::zero(); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = T::one();
        }
        Self { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, LinkError> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(LinkError::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `xᵀ M x`
    pub fn quadratic_form(&self, x: &[T]) -> T {
        let mut total = T::zero();
        for (i, xi) in x.iter().enumerate() {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            let mx: T = row.iter().zip(x).map(|(m, xj)| *m * *xj).sum();
            total = total + *xi * mx;
        }
        total
    }
}

#[derive(Debug, Clone)]
pub struct CoherenceParams<T> {
    pub bilinear: SquareMatrix<T>,
    /// Per-word weights; words without a weight contribute nothing.
    pub beta: HashMap<String, T>,
    pub context_window: usize,
}

impl<T: Scalar> CoherenceParams<T> {
    /// Identity `B`, no word weights, default window.
    pub fn identity(dim: usize) -> Self {
        Self { bilinear: SquareMatrix::identity(dim), beta: HashMap::new(), context_window: DEFAULT_CONTEXT_WINDOW }
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn check_dims<T: Scalar>(embeddings: &EmbeddingTable<T>, params: &CoherenceParams<T>) -> Result<(), LinkError> {
    if params.bilinear.dim() != embeddings.dimension() {
        return Err(LinkError::DimensionMismatch { expected: embeddings.dimension(), found: params.bilinear.dim() });
    }
    Ok(())
}

/// Context coherence `Σ_w β(w) x_wᵀ B x_w`; words without an embedding are
/// skipped.
pub fn coherence_score<T: Scalar>(
    _entity: &EntityId,
    context: &[&str],
    embeddings: &EmbeddingTable<T>,
    params: &CoherenceParams<T>,
) -> Result<T, LinkError> {
    check_dims(embeddings, params)?;
    let mut total = T::zero();
    for w in context {
        let (Some(x), Some(beta)) = (embeddings.get(w), params.beta.get(*w)) else {
            continue;
        };
        total = total + *beta * params.bilinear.quadratic_form(x);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate<T> {
    pub entity: EntityId,
    pub prior: f64,
    pub score: T,
}

/// Scores the `top_p` highest-prior candidates of one mention by
/// `prior + <mention mean vector, entity vector> + coherence`. Returns them
/// best first (ties to the smaller entity id).
pub fn rerank_candidates<T: Scalar>(
    candidates: &CandidateSet,
    mention_words: &[&str],
    context: &[&str],
    embeddings: &EmbeddingTable<T>,
    params: &CoherenceParams<T>,
    top_p: usize,
) -> Result<Vec<ScoredCandidate<T>>, LinkError> {
    check_dims(embeddings, params)?;
    let mention_vec = embeddings.mean_of(mention_words.iter().copied());
    let mut scored = Vec::with_capacity(top_p.min(candidates.len()));
    for c in candidates.candidates.iter().take(top_p) {
        let similarity = match (&mention_vec, embeddings.get(c.entity.as_str())) {
            (Some(m), Some(e)) => dot(m, e),
            _ => T::zero(),
        };
        let coherence = coherence_score(&c.entity, context, embeddings, params)?;
        let mut score = T::from_f64(c.prior) + similarity + coherence;
        if score.is_nan() {
            score = T::neg_infinity();
        }
        scored.push(ScoredCandidate { entity: c.entity.clone(), prior: c.prior, score });
    }
    scored.sort_by(|a, b| {
        b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.entity.cmp(&b.entity))
    });
    Ok(scored)
}

/// Like prior argmax, but each span's candidates are cut to the `top_p`
/// highest priors and re-scored before the argmax.
#[allow(clippy::too_many_arguments)]
pub fn link_coherence_rerank<T: Scalar>(
    text: &str,
    tokens: &[TokenSpan],
    policy: &CandidatePolicy,
    embeddings: &EmbeddingTable<T>,
    params: &CoherenceParams<T>,
    top_p: usize,
    n: usize,
) -> Result<Vec<Annotation>, LinkError> {
    check_dims(embeddings, params)?;
    let index = CharIndex::new(text);
    let words: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
    let mut proposals = Vec::new();
    for (start, len, span, set) in span_candidates(&index, tokens, policy, n) {
        let end = start + len;
        let left = start.saturating_sub(params.context_window);
        let right = (end + params.context_window).min(words.len());
        let context: Vec<&str> = words[left..start].iter().chain(&words[end..right]).copied().collect();
        let ranked = rerank_candidates(&set, &words[start..end], &context, embeddings, params, top_p)?;
        if let Some(best) = ranked.first() {
            if !best.entity.is_none() {
                proposals.push(Annotation::new(span, best.entity.clone()));
            }
        }
    }
    Ok(resolve_overlaps(proposals))
}

#[derive(Debug, Clone)]
pub struct CoherenceLinker<T> {
    pub policy: CandidatePolicy,
    pub embeddings: EmbeddingTable<T>,
    pub params: CoherenceParams<T>,
    pub top_p: usize,
    pub max_span_tokens: usize,
    pub tokenization: Tokenization,
}

impl<T: Scalar> Linker for CoherenceLinker<T> {
    fn name(&self) -> &str {
        "coherence"
    }

    fn link(&self, text: &str) -> Result<Vec<Annotation>, LinkError> {
        let tokens = self.tokenization.tokenize(text);
        link_coherence_rerank(
            text,
            &tokens,
            &self.policy,
            &self.embeddings,
            &self.params,
            self.top_p,
            self.max_span_tokens,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::tokenize;
    use crate::candidates::{candidates_for, AliasDictionary, FullVocabulary};
    use crate::linkers::link_prior_argmax;
    use std::sync::Arc;

    fn eid(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    #[test]
    fn coherence_examples() {
        let mut emb = EmbeddingTable::<f64>::new(2);
        emb.insert("w", vec![1.0, 0.0]).unwrap();
        let mut params = CoherenceParams::identity(2);
        let e = eid("E");
        assert_eq!(coherence_score(&e, &[], &emb, &params).unwrap(), 0.0);
        params.beta.insert("w".into(), 1.0);
        assert_eq!(coherence_score(&e, &["w"], &emb, &params).unwrap(), 1.0);
        params.beta.insert("w".into(), 0.0);
        assert_eq!(coherence_score(&e, &["w", "w"], &emb, &params).unwrap(), 0.0);
    }

    #[test]
    fn coherence_general_bilinear() {
        // x = (1, 2), B = [[1, 2], [3, 4]] -> xᵀBx = 1 + 2*2 + 2*3 + 4*4 = 27
        let mut emb = EmbeddingTable::<f32>::new(2);
        emb.insert("w", vec![1.0, 2.0]).unwrap();
        emb.insert("v", vec![0.0, 1.0]).unwrap();
        let params = CoherenceParams {
            bilinear: SquareMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap(),
            beta: [("w".to_string(), 0.5f32), ("v".to_string(), 2.0)].into_iter().collect(),
            context_window: 3,
        };
        let score = coherence_score(&eid("E"), &["w", "v", "missing"], &emb, &params).unwrap();
        assert_eq!(score, 0.5 * 27.0 + 2.0 * 4.0);
    }

    #[test]
    fn dimension_mismatch() {
        let emb = EmbeddingTable::<f64>::new(3);
        let params = CoherenceParams::identity(2);
        assert!(matches!(
            coherence_score(&eid("E"), &[], &emb, &params),
            Err(LinkError::DimensionMismatch { expected: 3, found: 2 })
        ));
        let mut emb = EmbeddingTable::<f64>::new(2);
        assert!(emb.insert("x", vec![1.0]).is_err());
        assert!(SquareMatrix::<f64>::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn load_embedding_file() {
        let emb: EmbeddingTable<f32> = load_embeddings("# c\nJapan\t1 0.5\nJ\t0 -1\n".as_bytes()).unwrap();
        assert_eq!(emb.dimension(), 2);
        assert_eq!(emb.get("J"), Some(&[0.0f32, -1.0][..]));
        assert!(load_embeddings::<f64, _>("x\t1 2\ny\t1\n".as_bytes()).is_err());
        assert!(load_embeddings::<f64, _>("x 1 2\n".as_bytes()).is_err());
        assert!(load_embeddings::<f64, _>("x\t1 z\n".as_bytes()).is_err());
    }

    #[test]
    fn embeddings_can_flip_the_prior_decision() {
        let d = AliasDictionary::from_entries([
            ("Japan".to_string(), eid("JAPAN"), 0.6),
            ("Japan".to_string(), eid("JAPAN_NT"), 0.4),
        ])
        .unwrap();
        let policy = CandidatePolicy::Dictionary(Arc::new(d));
        let mut emb = EmbeddingTable::<f64>::new(2);
        emb.insert("Japan", vec![0.0, 1.0]).unwrap();
        emb.insert("JAPAN_NT", vec![0.0, 1.0]).unwrap();
        emb.insert("JAPAN", vec![1.0, 0.0]).unwrap();
        let params = CoherenceParams::identity(2);
        let text = "Japan won";
        let out = link_coherence_rerank(text, &tokenize(text), &policy, &emb, &params, 30, 5).unwrap();
        assert_eq!(out[0].entity, eid("JAPAN_NT"));
        // top_p = 1 keeps only the highest prior
        let out = link_coherence_rerank(text, &tokenize(text), &policy, &emb, &params, 1, 5).unwrap();
        assert_eq!(out[0].entity, eid("JAPAN"));
    }

    #[test]
    fn truncation_counts() {
        let ids: Vec<EntityId> = (0..5597).map(|i| eid(&format!("E{i:05}"))).collect();
        let policy = CandidatePolicy::FullVocabulary(Arc::new(FullVocabulary::new(ids).unwrap()));
        let set = candidates_for("Japan", &policy);
        let emb = EmbeddingTable::<f64>::new(4);
        let params = CoherenceParams::identity(4);
        assert_eq!(rerank_candidates(&set, &["Japan"], &[], &emb, &params, 30).unwrap().len(), 30);
        let small = candidates_for(
            "Japan",
            &CandidatePolicy::FullVocabulary(Arc::new(FullVocabulary::new([eid("A"), eid("B")]).unwrap())),
        );
        let all = rerank_candidates(&small, &["Japan"], &[], &emb, &params, usize::MAX).unwrap();
        let capped = rerank_candidates(&small, &["Japan"], &[], &emb, &params, 30).unwrap();
        assert_eq!(all, capped);
    }

    #[test]
    fn zero_embeddings_match_prior_argmax() {
        let d = AliasDictionary::from_entries([
            ("Japan".to_string(), eid("JAPAN_NT"), 0.7),
            ("Japan".to_string(), eid("JAPAN"), 0.3),
            ("Syria".to_string(), eid("SYRIA"), 1.0),
            ("New York".to_string(), eid("NYC"), 0.8),
        ])
        .unwrap();
        let policy = CandidatePolicy::Dictionary(Arc::new(d));
        let mut emb = EmbeddingTable::<f32>::new(3);
        for k in ["Japan", "JAPAN_NT", "JAPAN", "won", "New", "York", "NYC"] {
            emb.insert(k, vec![0.0; 3]).unwrap();
        }
        let params = CoherenceParams::identity(3);
        let text = "Japan beat Syria in New York .";
        let rerank = link_coherence_rerank(text, &tokenize(text), &policy, &emb, &params, 30, 5).unwrap();
        assert_eq!(rerank, link_prior_argmax(text, &policy, 5));
    }
}
