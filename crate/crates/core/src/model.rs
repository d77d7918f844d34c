//! Documents, spans and annotations shared by every other module.
//!
//! All character offsets count Unicode scalar values, never bytes, so that an
//! annotation triple means the same thing regardless of how the text was
//! encoded on the wire.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier reserved for "no knowledge-base link".
pub const NONE_ENTITY: &str = "--NME--";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid span ({begin}, {end}) for text of length {len}")]
    InvalidSpan { begin: usize, end: usize, len: usize },
    #[error("invalid entity id {0:?}: must be non-empty without surrounding whitespace")]
    InvalidEntityId(String),
    #[error("gold annotations overlap: {first} and {second}")]
    OverlappingGold { first: Annotation, second: Annotation },
}

/// Canonical knowledge-base identifier. Opaque: no redirect or alias
/// resolution is ever applied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EntityId {
    id: String,
    is_none: bool,
}

impl EntityId {
    pub fn new(id: impl Into<String>) -> Result<Self, ModelError> {
        let id = id.into();
        if id.is_empty() || id.trim() != id {
            return Err(ModelError::InvalidEntityId(id));
        }
        let is_none = id == NONE_ENTITY;
        Ok(Self { id, is_none })
    }

    /// The reserved *None* entity.
    pub fn none() -> Self {
        Self { id: NONE_ENTITY.to_string(), is_none: true }
    }

    pub fn as_str(&self) -> &str {
        &self.id
    }

    pub fn is_none(&self) -> bool {
        self.is_none
    }
}

impl TryFrom<String> for EntityId {
    type Error = ModelError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<EntityId> for String {
    fn from(value: EntityId) -> Self {
        value.id
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

/// Half-open character range `[begin, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub begin: usize,
    pub end: usize,
}

impl Span {
    /// Builds a non-empty span. Bounds against a document are checked
    /// separately with [`Span::check_within`].
    pub fn new(begin: usize, end: usize) -> Result<Self, ModelError> {
        if begin >= end {
            return Err(ModelError::InvalidSpan { begin, end, len: end });
        }
        Ok(Self { begin, end })
    }

    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin >= self.end
    }

    pub fn check_within(&self, text_len: usize) -> Result<(), ModelError> {
        if self.begin < self.end && self.end <= text_len {
            Ok(())
        } else {
            Err(ModelError::InvalidSpan { begin: self.begin, end: self.end, len: text_len })
        }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.begin < other.end && other.begin < self.end
    }

    pub fn shifted(&self, offset: usize) -> Span {
        Span { begin: self.begin + offset, end: self.end + offset }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.begin, self.end)
    }
}

/// A (mention span, entity) pair. Ordering is `(begin, end, entity)`, which
/// is also the processing order of every matching pass.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Annotation {
    pub span: Span,
    pub entity: EntityId,
}

impl Annotation {
    pub fn new(span: Span, entity: EntityId) -> Self {
        Self { span, entity }
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.span.begin, self.span.end, self.entity)
    }
}

/// Number of Unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte positions of every character boundary in a text, for repeated
/// character-offset slicing.
#[derive(Debug, Clone)]
pub struct CharIndex<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        Self { text, bytes }
    }

    /// Length in characters.
    pub fn len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, span: Span) -> Option<&'a str> {
        if span.begin > span.end || span.end > self.len() {
            return None;
        }
        Some(&self.text[self.bytes[span.begin]..self.bytes[span.end]])
    }

    pub fn slice_range(&self, begin: usize, end: usize) -> Option<&'a str> {
        if begin > end || end > self.len() {
            return None;
        }
        Some(&self.text[self.bytes[begin]..self.bytes[end]])
    }
}

/// Slices `text` by a character span; `None` when out of bounds.
pub fn slice_chars(text: &str, span: Span) -> Option<&str> {
    let mut iter = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let start = iter.nth(span.begin)?;
    if span.end < span.begin {
        return None;
    }
    let stop = if span.end == span.begin { start } else { iter.nth(span.end - span.begin - 1)? };
    Some(&text[start..stop])
}

/// One token of a tokenized text together with its character span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSpan {
    pub token_index: usize,
    pub span: Span,
    pub surface: String,
}

/// Raw text plus gold and predicted annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub gold: Vec<Annotation>,
    pub predicted: Vec<Annotation>,
}

impl AnnotatedDocument {
    /// Validates bounds and gold disjointness. Both annotation lists are
    /// normalized on the way in.
    pub fn new(
        doc_id: impl Into<String>,
        text: impl Into<String>,
        gold: Vec<Annotation>,
        predicted: Vec<Annotation>,
    ) -> Result<Self, ModelError> {
        let text = text.into();
        let len = char_len(&text);
        let gold = normalize_annotations(&gold, len)?;
        check_disjoint(&gold)?;
        let predicted = normalize_annotations(&predicted, len)?;
        Ok(Self { doc_id: doc_id.into(), text, gold, predicted })
    }

    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }

    pub fn surface(&self, span: Span) -> Option<&str> {
        slice_chars(&self.text, span)
    }
}

/// Fails with `OverlappingGold` on the first overlapping pair of a sorted list.
pub fn check_disjoint(sorted: &[Annotation]) -> Result<(), ModelError> {
    let mut furthest: Option<&Annotation> = None;
    for ann in sorted {
        if let Some(prev) = furthest {
            if prev.span.overlaps(&ann.span) {
                return Err(ModelError::OverlappingGold { first: prev.clone(), second: ann.clone() });
            }
        }
        if furthest.is_none_or(|p| ann.span.end > p.span.end) {
            furthest = Some(ann);
        }
    }
    Ok(())
}

/// Sorts by `(begin, end, entity)` and removes exact duplicates after
/// checking every span against the document length.
pub fn normalize_annotations(annotations: &[Annotation], text_len: usize) -> Result<Vec<Annotation>, ModelError> {
    for ann in annotations {
        ann.span.check_within(text_len)?;
    }
    let mut out = annotations.to_vec();
    out.sort();
    out.dedup();
    Ok(out)
}

/// Set of entities that count as "in the knowledge base".
#[derive(Debug, Clone, Default)]
pub enum Vocabulary {
    /// Every entity except *None*.
    #[default]
    Any,
    Closed(HashSet<EntityId>),
}

impl Vocabulary {
    pub fn closed(entities: impl IntoIterator<Item = EntityId>) -> Self {
        Self::Closed(entities.into_iter().collect())
    }

    pub fn contains(&self, entity: &EntityId) -> bool {
        if entity.is_none() {
            return false;
        }
        match self {
            Vocabulary::Any => true,
            Vocabulary::Closed(set) => set.contains(entity),
        }
    }
}

/// Keeps annotations whose entity is in the knowledge base; *None* links are
/// always dropped. Input order is preserved.
pub fn filter_inkb(annotations: &[Annotation], vocabulary: &Vocabulary) -> Vec<Annotation> {
    annotations.iter().filter(|a| vocabulary.contains(&a.entity)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ann(b: usize, e: usize, id: &str) -> Annotation {
        Annotation::new(Span::new(b, e).unwrap(), EntityId::new(id).unwrap())
    }

    #[test]
    fn entity_id_validation() {
        assert!(EntityId::new("").is_err());
        assert!(EntityId::new(" Japan").is_err());
        assert!(EntityId::new("Japan\n").is_err());
        assert!(!EntityId::new("Japan").unwrap().is_none());
        assert!(EntityId::new(NONE_ENTITY).unwrap().is_none());
        assert_eq!(EntityId::none(), EntityId::new(NONE_ENTITY).unwrap());
    }

    #[test]
    fn span_rejects_empty_and_reversed() {
        assert!(Span::new(3, 3).is_err());
        assert!(Span::new(4, 3).is_err());
        assert!(Span::new(0, 1).unwrap().check_within(1).is_ok());
        assert!(Span::new(0, 2).unwrap().check_within(1).is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_annotations(&[], 0).unwrap(), vec![]);
        let input = vec![ann(10, 15, "B"), ann(0, 5, "A"), ann(0, 5, "A")];
        assert_eq!(normalize_annotations(&input, 20).unwrap(), vec![ann(0, 5, "A"), ann(10, 15, "B")]);
        let overlapping = vec![ann(0, 5, "A"), ann(3, 8, "B")];
        assert_eq!(normalize_annotations(&overlapping, 20).unwrap(), overlapping);
    }

    #[test]
    fn normalize_rejects_out_of_bounds() {
        let err = normalize_annotations(&[ann(0, 5, "A")], 4).unwrap_err();
        assert_eq!(err, ModelError::InvalidSpan { begin: 0, end: 5, len: 4 });
    }

    #[test]
    fn filter_inkb_examples() {
        let vocab = Vocabulary::closed([EntityId::new("A").unwrap(), EntityId::none()]);
        assert_eq!(filter_inkb(&[ann(0, 5, "A"), ann(6, 9, NONE_ENTITY)], &vocab), vec![ann(0, 5, "A")]);
        let vocab = Vocabulary::closed([EntityId::new("A").unwrap(), EntityId::new("B").unwrap()]);
        assert!(filter_inkb(&[ann(0, 5, "X")], &vocab).is_empty());
        assert!(filter_inkb(&[], &vocab).is_empty());
    }

    #[test]
    fn document_rejects_overlapping_gold() {
        let err = AnnotatedDocument::new("d", "New York City", vec![ann(0, 8, "NY"), ann(4, 13, "C")], vec![]);
        assert!(matches!(err, Err(ModelError::OverlappingGold { .. })));
        // nested inside a longer earlier span
        let err =
            AnnotatedDocument::new("d", "abcdefghij", vec![ann(0, 9, "A"), ann(2, 3, "B"), ann(4, 5, "C")], vec![]);
        assert!(matches!(err, Err(ModelError::OverlappingGold { .. })));
        let ok = AnnotatedDocument::new("d", "New York", vec![ann(4, 8, "Y"), ann(0, 3, "N")], vec![]).unwrap();
        assert_eq!(ok.gold[0], ann(0, 3, "N"));
        assert_eq!(ok.surface(ok.gold[1].span), Some("York"));
    }

    #[test]
    fn char_offsets_are_scalar_values() {
        let text = "Zürich ist schön";
        let idx = CharIndex::new(text);
        assert_eq!(idx.len(), 16);
        assert_eq!(idx.slice(Span::new(0, 6).unwrap()), Some("Zürich"));
        assert_eq!(slice_chars(text, Span::new(11, 16).unwrap()), Some("schön"));
        assert_eq!(slice_chars(text, Span::new(11, 17).unwrap()), None);
    }

    fn arb_annotations() -> impl Strategy<Value = Vec<Annotation>> {
        prop::collection::vec((0usize..40, 1usize..10, 0usize..4), 0..25)
            .prop_map(|v| v.into_iter().map(|(b, l, e)| ann(b, b + l, ["A", "B", "C", NONE_ENTITY][e])).collect())
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(anns in arb_annotations()) {
            let once = normalize_annotations(&anns, 50).unwrap();
            let twice = normalize_annotations(&once, 50).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn filter_inkb_is_subsequence(anns in arb_annotations()) {
            let vocab = Vocabulary::closed([EntityId::new("A").unwrap(), EntityId::new("C").unwrap()]);
            let out = filter_inkb(&anns, &vocab);
            let mut it = anns.iter();
            for a in &out {
                prop_assert!(it.any(|x| x == a));
                prop_assert!(!a.entity.is_none());
            }
        }

        #[test]
        fn slice_chars_matches_char_index(s in "\\PC{0,30}", b in 0usize..32, l in 1usize..8) {
            let span = Span { begin: b, end: b + l };
            prop_assert_eq!(slice_chars(&s, span), CharIndex::new(&s).slice(span));
        }
    }
}
