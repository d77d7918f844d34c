//! CoNLL/AIDA-style corpus reading.
//!
//! One token per line, documents opened by a `-DOCSTART-` line, blank lines
//! between sentences. Columns are separated by tabs when the line contains a
//! tab and by runs of whitespace otherwise. A line holding only a token is an
//! `O` token (the AIDA convention). The entity column value `--NME--` maps to
//! the *None* entity.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use thiserror::Error;

use crate::model::{AnnotatedDocument, Annotation, EntityId, ModelError, Span, TokenSpan};

pub const DOCSTART: &str = "-DOCSTART-";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: I tag without a preceding B/I tag for entity {entity}")]
    DanglingITag { line: usize, entity: String },
    #[error("corpus contains no -DOCSTART- document")]
    EmptyCorpus,
    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),
    #[error("input is not valid UTF-8 text: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "B" => Some(BioTag::B),
            "I" => Some(BioTag::I),
            "O" => Some(BioTag::O),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllToken {
    pub surface: String,
    pub bio_tag: BioTag,
    pub entity: Option<EntityId>,
}

impl ConllToken {
    pub fn outside(surface: impl Into<String>) -> Self {
        Self { surface: surface.into(), bio_tag: BioTag::O, entity: None }
    }

    pub fn tagged(surface: impl Into<String>, bio_tag: BioTag, entity: EntityId) -> Self {
        Self { surface: surface.into(), bio_tag, entity: Some(entity) }
    }
}

/// Zero-based column indices. The default reads `token BIO entity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnLayout {
    pub token: usize,
    pub bio: usize,
    pub entity: usize,
}

impl Default for ColumnLayout {
    fn default() -> Self {
        Self { token: 0, bio: 1, entity: 2 }
    }
}

impl ColumnLayout {
    /// The original AIDA-YAGO2 TSV layout: `token BIO mention entity ...`.
    pub fn aida_yago() -> Self {
        Self { token: 0, bio: 1, entity: 3 }
    }
}

/// A parsed document together with its token layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllDocument {
    pub document: AnnotatedDocument,
    pub tokens: Vec<TokenSpan>,
    /// Indices of tokens that start a new sentence (the first sentence is
    /// implicit and not listed).
    pub sentence_breaks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub documents: Vec<ConllDocument>,
}

impl Corpus {
    pub fn iter_documents(&self) -> impl Iterator<Item = &AnnotatedDocument> {
        self.documents.iter().map(|d| &d.document)
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn gold_count(&self) -> usize {
        self.iter_documents().map(|d| d.gold.len()).sum()
    }
}

fn is_closing(surface: &str) -> bool {
    if surface.is_empty() {
        return false;
    }
    if surface.chars().all(|c| matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | '\'' | ')' | ']' | '}')) {
        return true;
    }
    // clitics produced by contraction splitting: 's, 're, n't ...
    let lower = surface.to_lowercase();
    lower == "n't" || (surface.starts_with('\'') && surface[1..].chars().all(char::is_alphabetic))
}

fn is_opening(surface: &str) -> bool {
    !surface.is_empty() && surface.chars().all(|c| matches!(c, '(' | '[' | '{'))
}

/// Detokenizes by joining tokens with single spaces, except that no space is
/// inserted before closing punctuation (`.,;:!?')]}` and clitics such as
/// `'s`, `n't`) or after opening brackets. A token listed in
/// `sentence_breaks` is always preceded by a space.
pub fn reconstruct_text(tokens: &[ConllToken], sentence_breaks: &[usize]) -> (String, Vec<TokenSpan>) {
    let breaks: HashSet<usize> = sentence_breaks.iter().copied().collect();
    let mut text = String::new();
    let mut spans = Vec::with_capacity(tokens.len());
    let mut offset = 0usize;
    let mut prev: Option<&str> = None;
    for (i, tok) in tokens.iter().enumerate() {
        if let Some(p) = prev {
            let glue = !breaks.contains(&i) && (is_closing(&tok.surface) || is_opening(p));
            if !glue {
                text.push(' ');
                offset += 1;
            }
        }
        let len = tok.surface.chars().count();
        text.push_str(&tok.surface);
        spans.push(TokenSpan {
            token_index: i,
            span: Span { begin: offset, end: offset + len },
            surface: tok.surface.clone(),
        });
        offset += len;
        prev = Some(&tok.surface);
    }
    (text, spans)
}

#[derive(Default)]
struct DocBuilder {
    doc_id: String,
    tokens: Vec<ConllToken>,
    sentence_breaks: Vec<usize>,
    pending_break: bool,
}

impl DocBuilder {
    fn finish(self) -> Result<ConllDocument, CorpusError> {
        let (text, spans) = reconstruct_text(&self.tokens, &self.sentence_breaks);
        let mut gold = Vec::new();
        let mut open: Option<(usize, usize, EntityId)> = None;
        for (i, tok) in self.tokens.iter().enumerate() {
            match (tok.bio_tag, &tok.entity) {
                (BioTag::I, Some(_)) => {
                    if let Some(run) = open.as_mut() {
                        run.1 = i;
                    }
                }
                (BioTag::B, Some(e)) => {
                    if let Some((s, t, ent)) = open.take() {
                        gold.push(Annotation::new(Span::new(spans[s].span.begin, spans[t].span.end)?, ent));
                    }
                    open = Some((i, i, e.clone()));
                }
                _ => {
                    if let Some((s, t, ent)) = open.take() {
                        gold.push(Annotation::new(Span::new(spans[s].span.begin, spans[t].span.end)?, ent));
                    }
                }
            }
        }
        if let Some((s, t, ent)) = open.take() {
            gold.push(Annotation::new(Span::new(spans[s].span.begin, spans[t].span.end)?, ent));
        }
        let document = AnnotatedDocument::new(self.doc_id, text, gold, Vec::new())?;
        Ok(ConllDocument { document, tokens: spans, sentence_breaks: self.sentence_breaks })
    }
}

fn doc_id_from_marker(line: &str, ordinal: usize) -> String {
    let rest = line[DOCSTART.len()..].trim();
    let inner = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')).unwrap_or(rest).trim();
    if inner.is_empty() {
        format!("doc{ordinal}")
    } else {
        inner.to_string()
    }
}

/// Parses a CoNLL-style corpus. Deterministic: identical bytes give an
/// identical [`Corpus`].
pub fn parse_conll<R: Read>(input: R, name: &str, layout: &ColumnLayout) -> Result<Corpus, CorpusError> {
    let reader = BufReader::new(input);
    let mut documents = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut current: Option<DocBuilder> = None;
    // (entity of the token on the previous line, if it was B/I)
    let mut previous_entity: Option<EntityId> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.starts_with(DOCSTART) {
            if let Some(doc) = current.take() {
                documents.push(doc.finish()?);
            }
            let doc_id = doc_id_from_marker(trimmed, documents.len());
            if !seen_ids.insert(doc_id.clone()) {
                return Err(CorpusError::DuplicateDocId(doc_id));
            }
            current = Some(DocBuilder { doc_id, ..Default::default() });
            previous_entity = None;
            continue;
        }
        if trimmed.trim().is_empty() {
            if let Some(doc) = current.as_mut() {
                if !doc.tokens.is_empty() {
                    doc.pending_break = true;
                }
            }
            previous_entity = None;
            continue;
        }
        let Some(doc) = current.as_mut() else {
            return Err(CorpusError::MalformedLine {
                line: lineno,
                reason: "token line before the first -DOCSTART- marker".into(),
            });
        };
        let fields: Vec<&str> =
            if trimmed.contains('\t') { trimmed.split('\t').collect() } else { trimmed.split_whitespace().collect() };
        let token = parse_token_line(&fields, layout, lineno)?;
        match token.bio_tag {
            BioTag::I => {
                let entity = token.entity.clone().expect("I tokens carry an entity");
                if previous_entity.as_ref() != Some(&entity) {
                    return Err(CorpusError::DanglingITag { line: lineno, entity: entity.to_string() });
                }
            }
            BioTag::B => {}
            BioTag::O => {}
        }
        previous_entity = token.entity.clone();
        if doc.pending_break {
            doc.sentence_breaks.push(doc.tokens.len());
            doc.pending_break = false;
        }
        doc.tokens.push(token);
    }
    if let Some(doc) = current.take() {
        documents.push(doc.finish()?);
    }
    if documents.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(Corpus { name: name.to_string(), documents })
}

fn parse_token_line(fields: &[&str], layout: &ColumnLayout, line: usize) -> Result<ConllToken, CorpusError> {
    let malformed = |reason: String| CorpusError::MalformedLine { line, reason };
    let surface = fields
        .get(layout.token)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| malformed(format!("missing token column {}", layout.token)))?;
    if fields.len() == 1 {
        return Ok(ConllToken::outside(*surface));
    }
    let raw_tag = fields
        .get(layout.bio)
        .ok_or_else(|| malformed(format!("{} fields, no BIO column {}", fields.len(), layout.bio)))?;
    let tag = BioTag::parse(raw_tag).ok_or_else(|| malformed(format!("unknown BIO tag {raw_tag:?}")))?;
    if tag == BioTag::O {
        return Ok(ConllToken::outside(*surface));
    }
    let raw_entity = fields
        .get(layout.entity)
        .ok_or_else(|| malformed(format!("{} fields, no entity column {}", fields.len(), layout.entity)))?;
    let entity = EntityId::new(*raw_entity).map_err(|e| malformed(e.to_string()))?;
    Ok(ConllToken::tagged(*surface, tag, entity))
}
