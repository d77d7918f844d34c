//! Systems under test, seen from the runner: either a remote service or a
//! pipeline called in-process. Both paths validate responses the same way.

use std::sync::Arc;
use std::time::Duration;

use elbench_core::Annotation;
use thiserror::Error;

use crate::service::Pipeline;
use crate::wire::{AnnotateRequest, AnnotateResponse};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotateError {
    /// The system could not be reached at all; the run cannot continue.
    #[error("annotator unreachable: {0}")]
    Unreachable(String),
    /// The system answered, but not with a valid annotation list for this
    /// document.
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
}

pub trait Annotator: Send + Sync {
    fn annotate(&self, doc_id: &str, text: &str) -> Result<Vec<Annotation>, AnnotateError>;
}

#[derive(Debug, Clone)]
pub struct InProcessAnnotator {
    pub pipeline: Arc<Pipeline>,
}

impl InProcessAnnotator {
    pub fn new(pipeline: Arc<Pipeline>) -> Self {
        Self { pipeline }
    }
}

impl Annotator for InProcessAnnotator {
    fn annotate(&self, _doc_id: &str, text: &str) -> Result<Vec<Annotation>, AnnotateError> {
        let annotations = self.pipeline.annotate(text).map_err(|e| AnnotateError::ProtocolViolation(e.to_string()))?;
        // same validation as a networked response
        AnnotateResponse::from_annotations(&annotations)
            .to_annotations(text)
            .map_err(|e| AnnotateError::ProtocolViolation(e.to_string()))
    }
}

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct HttpAnnotator {
    url: String,
    client: reqwest::blocking::Client,
}

impl HttpAnnotator {
    /// `endpoint` is a base URL (`http://host:port`) or the full
    /// `/annotate` URL.
    pub fn new(endpoint: &str, timeout: Duration) -> Result<Self, AnnotateError> {
        let base = endpoint.trim_end_matches('/');
        let base = if base.contains("://") { base.to_string() } else { format!("http://{base}") };
        let url = if base.ends_with("/annotate") { base } else { format!("{base}/annotate") };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| AnnotateError::Unreachable(e.to_string()))?;
        Ok(Self { url, client })
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Annotator for HttpAnnotator {
    fn annotate(&self, doc_id: &str, text: &str) -> Result<Vec<Annotation>, AnnotateError> {
        let request = AnnotateRequest { text: text.to_string(), doc_id: Some(doc_id.to_string()) };
        let response = self.client.post(&self.url).json(&request).send().map_err(|e| {
            if e.is_timeout() {
                AnnotateError::ProtocolViolation(format!("timed out: {e}"))
            } else {
                AnnotateError::Unreachable(e.to_string())
            }
        })?;
        let status = response.status();
        let body = response.bytes().map_err(|e| AnnotateError::ProtocolViolation(e.to_string()))?;
        if !status.is_success() {
            let snippet: String = String::from_utf8_lossy(&body).chars().take(200).collect();
            return Err(AnnotateError::ProtocolViolation(format!("status {status}: {snippet}")));
        }
        let parsed: AnnotateResponse = serde_json::from_slice(&body)
            .map_err(|e| AnnotateError::ProtocolViolation(format!("malformed response: {e}")))?;
        parsed.to_annotations(text).map_err(|e| AnnotateError::ProtocolViolation(e.to_string()))
    }
}
