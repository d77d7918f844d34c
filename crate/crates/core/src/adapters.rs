//! Input adapters that make raw text digestible for linkers with their own
//! input expectations: CoNLL-like word tokenization with offsets, splitting
//! of long documents into token-bounded segments and merging of their
//! annotations, and subword-to-character offset conversion.

use thiserror::Error;

use crate::model::{normalize_annotations, Annotation, CharIndex, EntityId, ModelError, Span, TokenSpan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    #[error("{segments} segments but {annotation_lists} annotation lists")]
    LengthMismatch { segments: usize, annotation_lists: usize },
    #[error("annotation {annotation} out of bounds (limit {limit})")]
    OutOfBounds { annotation: Annotation, limit: usize },
    #[error("subtoken {0} is not in the subtoken map")]
    UnknownSubtoken(usize),
    #[error("subtoken indices must be strictly increasing (saw {previous} then {next})")]
    UnorderedSubtokens { previous: usize, next: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

const APOSTROPHES: [char; 2] = ['\'', '\u{2019}'];
const CLITIC_SUFFIXES: [&str; 6] = ["s", "re", "ve", "ll", "d", "m"];

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Word tokenizer approximating CoNLL conventions.
///
/// Rules, in order, applied to every maximal run of non-whitespace:
/// 1. leading and trailing non-alphanumeric characters become one token each;
/// 2. a remaining core ending in `n't` (and longer than it) is split before
///    the `n`, e.g. `don't` -> `do`, `n't`;
/// 3. otherwise a core with an apostrophe followed by `s`, `re`, `ve`, `ll`,
///    `d` or `m` at its end is split at the apostrophe, e.g. `Japan's` ->
///    `Japan`, `'s`.
pub fn tokenize(text: &str) -> Vec<TokenSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut pieces: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut pieces);
    }
    pieces
        .into_iter()
        .enumerate()
        .map(|(token_index, (b, e))| TokenSpan {
            token_index,
            span: Span { begin: b, end: e },
            surface: chars[b..e].iter().collect(),
        })
        .collect()
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    let mut lo = start;
    let mut hi = end;
    while lo < hi && is_punct(chars[lo]) {
        out.push((lo, lo + 1));
        lo += 1;
    }
    let mut trailing = Vec::new();
    while hi > lo && is_punct(chars[hi - 1]) {
        trailing.push((hi - 1, hi));
        hi -= 1;
    }
    if lo < hi {
        for piece in split_contraction(chars, lo, hi) {
            out.push(piece);
        }
    }
    out.extend(trailing.into_iter().rev());
}

fn split_contraction(chars: &[char], lo: usize, hi: usize) -> Vec<(usize, usize)> {
    let core = &chars[lo..hi];
    let n = core.len();
    if n > 3
        && core[n - 3].eq_ignore_ascii_case(&'n')
        && APOSTROPHES.contains(&core[n - 2])
        && core[n - 1].eq_ignore_ascii_case(&'t')
    {
        return vec![(lo, hi - 3), (hi - 3, hi)];
    }
    if let Some(pos) = core.iter().rposition(|c| APOSTROPHES.contains(c)) {
        if pos > 0 {
            let suffix: String = core[pos + 1..].iter().collect::<String>().to_lowercase();
            if CLITIC_SUFFIXES.contains(&suffix.as_str()) {
                return vec![(lo, lo + pos), (lo + pos, hi)];
            }
        }
    }
    vec![(lo, hi)]
}

/// Whitespace-only tokenization: what a linker sees when no tokenization
/// adapter is applied.
pub fn tokenize_whitespace(text: &str) -> Vec<TokenSpan> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut surface = String::new();
    let mut pos = 0;
    for c in text.chars() {
        if c.is_whitespace() {
            if let Some(b) = start.take() {
                out.push(TokenSpan {
                    token_index: out.len(),
                    span: Span { begin: b, end: pos },
                    surface: std::mem::take(&mut surface),
                });
            }
        } else {
            start.get_or_insert(pos);
            surface.push(c);
        }
        pos += 1;
    }
    if let Some(b) = start {
        out.push(TokenSpan { token_index: out.len(), span: Span { begin: b, end: pos }, surface });
    }
    out
}

/// A contiguous, token-aligned piece of a parent document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub text: String,
    /// Character offset of `text` in the parent document.
    pub char_offset: usize,
    /// Half-open range of parent token ordinals covered by this segment.
    pub token_range: (usize, usize),
}

impl Segment {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

fn is_sentence_final(surface: &str) -> bool {
    matches!(surface, "." | "!" | "?")
}

/// Splits a document into non-overlapping segments of at most `max_tokens`
/// tokens.
///
/// Greedy: each segment ends after the last sentence-final token (`.`, `!`,
/// `?`) that keeps it within the limit, or is cut hard at `max_tokens` when
/// no such token exists. Whitespace between segments is skipped. A document
/// within the limit comes back as one segment equal to the input.
pub fn split_document(text: &str, max_tokens: usize) -> Vec<Segment> {
    let max_tokens = max_tokens.max(1);
    let tokens = tokenize(text);
    if tokens.len() <= max_tokens {
        return vec![Segment { text: text.to_string(), char_offset: 0, token_range: (0, tokens.len()) }];
    }
    split_tokens(text, &tokens, max_tokens)
}

/// Same greedy rule over an existing tokenization.
pub fn split_tokens(text: &str, tokens: &[TokenSpan], max_tokens: usize) -> Vec<Segment> {
    let index = CharIndex::new(text);
    let mut segments = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let limit = (start + max_tokens).min(tokens.len());
        let end = if limit == tokens.len() {
            limit
        } else {
            (start + 1..=limit).rev().find(|&e| is_sentence_final(&tokens[e - 1].surface)).unwrap_or(limit)
        };
        let begin_char = tokens[start].span.begin;
        let end_char = tokens[end - 1].span.end;
        segments.push(Segment {
            text: index.slice_range(begin_char, end_char).unwrap_or_default().to_string(),
            char_offset: begin_char,
            token_range: (start, end),
        });
        start = end;
    }
    segments
}

/// Shifts each segment's annotations into parent-document coordinates and
/// normalizes the union.
pub fn merge_segment_annotations(
    segments: &[Segment],
    per_segment: &[Vec<Annotation>],
    doc_len: usize,
) -> Result<Vec<Annotation>, AdapterError> {
    if segments.len() != per_segment.len() {
        return Err(AdapterError::LengthMismatch { segments: segments.len(), annotation_lists: per_segment.len() });
    }
    let mut merged = Vec::new();
    for (segment, annotations) in segments.iter().zip(per_segment) {
        let seg_len = segment.char_len();
        for ann in annotations {
            if ann.span.end > seg_len {
                return Err(AdapterError::OutOfBounds { annotation: ann.clone(), limit: seg_len });
            }
            let shifted = Annotation::new(ann.span.shifted(segment.char_offset), ann.entity.clone());
            if shifted.span.end > doc_len {
                return Err(AdapterError::OutOfBounds { annotation: shifted, limit: doc_len });
            }
            merged.push(shifted);
        }
    }
    Ok(normalize_annotations(&merged, doc_len)?)
}

/// Maps subword token ordinals to the character span of the word they came
/// from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubtokenMap {
    entries: Vec<(usize, Span)>,
}

impl SubtokenMap {
    pub fn new(entries: Vec<(usize, Span)>) -> Result<Self, AdapterError> {
        for pair in entries.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(AdapterError::UnorderedSubtokens { previous: pair[0].0, next: pair[1].0 });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, Span)] {
        &self.entries
    }

    pub fn parent_span(&self, subtoken: usize) -> Option<Span> {
        self.entries.binary_search_by_key(&subtoken, |(i, _)| *i).ok().map(|pos| self.entries[pos].1)
    }
}

/// Converts subtoken-level predictions `(first, last, entity)` (inclusive)
/// into character annotations: first subtoken's parent begin to last
/// subtoken's parent end.
pub fn subtoken_to_char(
    annotations: &[(usize, usize, EntityId)],
    map: &SubtokenMap,
) -> Result<Vec<Annotation>, AdapterError> {
    annotations
        .iter()
        .map(|(first, last, entity)| {
            let b = map.parent_span(*first).ok_or(AdapterError::UnknownSubtoken(*first))?;
            let e = map.parent_span(*last).ok_or(AdapterError::UnknownSubtoken(*last))?;
            Ok(Annotation::new(Span::new(b.begin, e.end)?, entity.clone()))
        })
        .collect()
}
