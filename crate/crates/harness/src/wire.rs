//! JSON wire format spoken between the runner and an annotator service.
//!
//! ```text
//! POST /annotate   {"text": "Japan won", "doc_id": "d1"}
//! 200              {"annotations": [{"begin": 0, "end": 5, "entity": "JAPAN_NT"}]}
//! 400              {"error": {"code": "malformed_request", "message": "..."}}
//! ```
//!
//! Offsets are character (Unicode scalar) positions, end-exclusive.

use elbench_core::model::{char_len, ModelError};
use elbench_core::{Annotation, EntityId, Span};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotateRequest {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireAnnotation {
    pub begin: usize,
    pub end: usize,
    pub entity: String,
}

impl From<&Annotation> for WireAnnotation {
    fn from(a: &Annotation) -> Self {
        Self { begin: a.span.begin, end: a.span.end, entity: a.entity.as_str().to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotateResponse {
    pub annotations: Vec<WireAnnotation>,
}

impl AnnotateResponse {
    pub fn from_annotations(annotations: &[Annotation]) -> Self {
        Self { annotations: annotations.iter().map(WireAnnotation::from).collect() }
    }

    /// Validates every triple against `text` and converts it. The first bad
    /// triple fails the whole response.
    pub fn to_annotations(&self, text: &str) -> Result<Vec<Annotation>, ModelError> {
        let len = char_len(text);
        self.annotations
            .iter()
            .map(|w| {
                let span = Span::new(w.begin, w.end)?;
                span.check_within(len)?;
                Ok(Annotation::new(span, EntityId::new(w.entity.clone())?))
            })
            .collect()
    }
}

/// Machine-readable error codes in 4xx/5xx bodies.
pub mod codes {
    pub const MALFORMED_REQUEST: &str = "malformed_request";
    pub const LINKER_FAILURE: &str = "linker_failure";
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl ErrorBody {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { error: ErrorDetail { code: code.to_string(), message: message.into() } }
    }
}
