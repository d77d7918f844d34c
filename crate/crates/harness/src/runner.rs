//! Drives an annotator over a corpus and scores the answers.

use std::collections::BTreeMap;
use std::time::Instant;

use elbench_core::corpus::ConllDocument;
use elbench_core::evaluation::{match_annotations, DocumentSummary, EvalError};
use elbench_core::model::{normalize_annotations, ModelError};
use elbench_core::{AnnotatedDocument, Annotation, Corpus, EvaluationReport, Vocabulary};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotator::{AnnotateError, Annotator};
use crate::wire::WireAnnotation;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("annotator unreachable at document {doc_id}: {message}")]
    AnnotatorUnreachable { doc_id: String, message: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Report label for the system, e.g. `prior_argmax/dict`.
    pub system: String,
    pub vocabulary: Vocabulary,
    /// Worker threads; 0 or 1 sends documents one at a time.
    pub parallel: usize,
    pub metadata: BTreeMap<String, String>,
}

/// One document's predictions as a JSON line. `text` is only needed when the
/// record is used as gold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub annotations: Vec<WireAnnotation>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub report: EvaluationReport,
    /// Accepted predictions in corpus order; empty for documents with a
    /// protocol violation.
    pub predictions: Vec<PredictionRecord>,
}

/// Scores one document. A violation replaces the predictions with nothing
/// and is noted on the summary.
pub fn score_document(
    document: &AnnotatedDocument,
    outcome: Result<Vec<Annotation>, String>,
    vocabulary: &Vocabulary,
) -> Result<(DocumentSummary, Vec<Annotation>), RunError> {
    let (predicted, violation) = match outcome {
        Ok(p) => match normalize_annotations(&p, document.char_len()) {
            Ok(p) => (p, None),
            Err(e) => (Vec::new(), Some(e.to_string())),
        },
        Err(message) => (Vec::new(), Some(message)),
    };
    let result = match_annotations(&document.gold, &predicted, vocabulary)?;
    let summary =
        DocumentSummary { doc_id: document.doc_id.clone(), counts: result.counts(), protocol_violation: violation };
    Ok((summary, predicted))
}

fn run_document(
    doc: &ConllDocument,
    annotator: &dyn Annotator,
    vocabulary: &Vocabulary,
) -> Result<(DocumentSummary, Vec<Annotation>), RunError> {
    let d = &doc.document;
    let outcome = match annotator.annotate(&d.doc_id, &d.text) {
        Ok(p) => Ok(p),
        Err(AnnotateError::ProtocolViolation(m)) => Err(m),
        Err(AnnotateError::Unreachable(message)) => {
            return Err(RunError::AnnotatorUnreachable { doc_id: d.doc_id.clone(), message })
        }
    };
    score_document(d, outcome, vocabulary)
}

/// Sends every document's text to `annotator` and scores the replies.
/// Results keep corpus order regardless of `parallel`.
pub fn run_benchmark_detailed(
    corpus: &Corpus,
    annotator: &dyn Annotator,
    options: &RunOptions,
) -> Result<BenchmarkRun, RunError> {
    let started = Instant::now();
    let vocab = &options.vocabulary;
    let scored: Vec<(DocumentSummary, Vec<Annotation>)> = if options.parallel > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.parallel)
            .build()
            .map_err(|e| RunError::ThreadPool(e.to_string()))?;
        pool.install(|| {
            corpus.documents.par_iter().map(|doc| run_document(doc, annotator, vocab)).collect::<Result<_, _>>()
        })?
    } else {
        corpus.documents.iter().map(|doc| run_document(doc, annotator, vocab)).collect::<Result<_, _>>()?
    };
    let runtime_ms = started.elapsed().as_millis() as u64;

    let mut per_document = Vec::with_capacity(scored.len());
    let mut predictions = Vec::with_capacity(scored.len());
    for (summary, predicted) in scored {
        predictions.push(PredictionRecord {
            doc_id: summary.doc_id.clone(),
            text: None,
            annotations: predicted.iter().map(WireAnnotation::from).collect(),
        });
        per_document.push(summary);
    }
    let mut report = EvaluationReport::from_documents(&corpus.name, &options.system, per_document, runtime_ms);
    report.metadata = options.metadata.clone();
    Ok(BenchmarkRun { report, predictions })
}

pub fn run_benchmark(
    corpus: &Corpus,
    annotator: &dyn Annotator,
    options: &RunOptions,
) -> Result<EvaluationReport, RunError> {
    run_benchmark_detailed(corpus, annotator, options).map(|r| r.report)
}
