//! InKB strong-match scoring and error analysis.
//!
//! Both sides are first reduced to in-KB annotations (no *None* links, no
//! entities outside the vocabulary). Predictions are then classified by five
//! passes, each visiting items in `(begin, end, entity)` order:
//!
//! 1. exact span and entity match with an unclaimed gold: true positive;
//! 2. exact span match with an unclaimed gold, other entity: incorrect entity;
//! 3. same entity as an unclaimed gold whose span it overlaps: incorrect mention;
//! 4. anything left: over-generated;
//! 5. unclaimed golds that no prediction overlaps at all: under-generated.
//!
//! Every claim consumes the gold, so each gold explains at most one
//! prediction, and a gold that is overlapped only by a wrong prediction is
//! not also counted as under-generated.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{check_disjoint, filter_inkb, Annotation, ModelError, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("gold annotations overlap: {first} and {second}")]
    OverlappingGold { first: Annotation, second: Annotation },
    #[error("error ratios need at least one gold annotation")]
    ZeroGold,
    #[error("cannot compare reports over different datasets ({baseline} vs {ablated})")]
    DatasetMismatch { baseline: String, ablated: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    pub true_positives: Vec<(Annotation, Annotation)>,
    pub incorrect_entity: Vec<Annotation>,
    pub incorrect_mention: Vec<Annotation>,
    pub over_generated: Vec<Annotation>,
    pub under_generated: Vec<Annotation>,
    pub gold_count: usize,
    pub pred_count: usize,
}

impl MatchResult {
    pub fn counts(&self) -> MatchCounts {
        MatchCounts {
            true_positives: self.true_positives.len(),
            incorrect_entity: self.incorrect_entity.len(),
            incorrect_mention: self.incorrect_mention.len(),
            over_generated: self.over_generated.len(),
            under_generated: self.under_generated.len(),
            gold_count: self.gold_count,
            pred_count: self.pred_count,
        }
    }
}

/// Category sizes of one or more [`MatchResult`]s; sums across documents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub incorrect_entity: usize,
    pub incorrect_mention: usize,
    pub over_generated: usize,
    pub under_generated: usize,
    pub gold_count: usize,
    pub pred_count: usize,
}

impl Add for MatchCounts {
    type Output = MatchCounts;

    fn add(self, o: MatchCounts) -> MatchCounts {
        MatchCounts {
            true_positives: self.true_positives + o.true_positives,
            incorrect_entity: self.incorrect_entity + o.incorrect_entity,
            incorrect_mention: self.incorrect_mention + o.incorrect_mention,
            over_generated: self.over_generated + o.over_generated,
            under_generated: self.under_generated + o.under_generated,
            gold_count: self.gold_count + o.gold_count,
            pred_count: self.pred_count + o.pred_count,
        }
    }
}

impl AddAssign for MatchCounts {
    fn add_assign(&mut self, o: MatchCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for MatchCounts {
    fn sum<I: Iterator<Item = MatchCounts>>(iter: I) -> Self {
        iter.fold(MatchCounts::default(), Add::add)
    }
}

/// Classifies predictions against gold. See the module docs for the passes.
pub fn match_annotations(
    gold: &[Annotation],
    pred: &[Annotation],
    vocabulary: &Vocabulary,
) -> Result<MatchResult, EvalError> {
    let mut gold = gold.to_vec();
    gold.sort();
    gold.dedup();
    check_disjoint(&gold).map_err(|e| match e {
        ModelError::OverlappingGold { first, second } => EvalError::OverlappingGold { first, second },
        other => unreachable!("check_disjoint only reports overlaps: {other}"),
    })?;
    let gold = filter_inkb(&gold, vocabulary);
    let mut pred = filter_inkb(pred, vocabulary);
    pred.sort();

    let mut result = MatchResult { gold_count: gold.len(), pred_count: pred.len(), ..Default::default() };
    // gold is sorted and disjoint, so spans are strictly increasing in both
    // begin and end; exact-span lookups can binary search
    let mut claimed = vec![false; gold.len()];
    let mut pending: Vec<&Annotation> = Vec::with_capacity(pred.len());

    let exact = |p: &Annotation| gold.binary_search_by(|g| g.span.cmp(&p.span)).ok();

    for p in &pred {
        match exact(p) {
            Some(i) if !claimed[i] && gold[i].entity == p.entity => {
                claimed[i] = true;
                result.true_positives.push((gold[i].clone(), p.clone()));
            }
            _ => pending.push(p),
        }
    }

    let mut rest = Vec::with_capacity(pending.len());
    for p in pending {
        match exact(p) {
            Some(i) if !claimed[i] => {
                claimed[i] = true;
                result.incorrect_entity.push(p.clone());
            }
            _ => rest.push(p),
        }
    }

    for p in rest {
        let first_overlap = gold.partition_point(|g| g.span.end <= p.span.begin);
        let hit = (first_overlap..gold.len())
            .take_while(|&i| gold[i].span.begin < p.span.end)
            .find(|&i| !claimed[i] && gold[i].entity == p.entity);
        match hit {
            Some(i) => {
                claimed[i] = true;
                result.incorrect_mention.push(p.clone());
            }
            None => result.over_generated.push(p.clone()),
        }
    }

    for (i, g) in gold.iter().enumerate() {
        if !claimed[i] && !pred.iter().any(|p| p.span.overlaps(&g.span)) {
            result.under_generated.push(g.clone());
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro precision, recall and F1 from corpus-wide sums. An empty side
/// scores 1.0 (so two empty sides give P = R = F1 = 1).
pub fn micro_prf_counts(counts: &MatchCounts) -> Prf {
    let tp = counts.true_positives as f64;
    let precision = if counts.pred_count == 0 { 1.0 } else { tp / counts.pred_count as f64 };
    let recall = if counts.gold_count == 0 { 1.0 } else { tp / counts.gold_count as f64 };
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Prf { precision, recall, f1 }
}

pub fn micro_prf(results: &[MatchResult]) -> Prf {
    micro_prf_counts(&results.iter().map(MatchResult::counts).sum())
}

/// Error category sizes divided by the number of gold annotations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub over_ratio: f64,
    pub under_ratio: f64,
    pub incorrect_entity_ratio: f64,
    pub incorrect_mention_ratio: f64,
}

pub fn error_ratios_counts(counts: &MatchCounts) -> Result<ErrorBreakdown, EvalError> {
    if counts.gold_count == 0 {
        return Err(EvalError::ZeroGold);
    }
    let g = counts.gold_count as f64;
    Ok(ErrorBreakdown {
        over_ratio: counts.over_generated as f64 / g,
        under_ratio: counts.under_generated as f64 / g,
        incorrect_entity_ratio: counts.incorrect_entity as f64 / g,
        incorrect_mention_ratio: counts.incorrect_mention as f64 / g,
    })
}

pub fn error_ratios(result: &MatchResult) -> Result<ErrorBreakdown, EvalError> {
    error_ratios_counts(&result.counts())
}

/// Per-document line of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub counts: MatchCounts,
    /// Set when the annotator's answer for this document was rejected; the
    /// document is then scored with no predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol_violation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset: String,
    /// Label of the evaluated system run, e.g. `prior_argmax/dict`.
    pub system: String,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub totals: MatchCounts,
    /// `None` when the dataset has no in-KB gold annotation.
    pub breakdown: Option<ErrorBreakdown>,
    pub per_document: Vec<DocumentSummary>,
    /// Run configuration (linker, policy, n, seed, ...), for provenance.
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
    pub runtime_ms: u64,
}

impl EvaluationReport {
    /// Aggregates per-document summaries into a report.
    pub fn from_documents(
        dataset: impl Into<String>,
        system: impl Into<String>,
        per_document: Vec<DocumentSummary>,
        runtime_ms: u64,
    ) -> Self {
        let totals: MatchCounts = per_document.iter().map(|d| d.counts).sum();
        let prf = micro_prf_counts(&totals);
        Self {
            dataset: dataset.into(),
            system: system.into(),
            micro_precision: prf.precision,
            micro_recall: prf.recall,
            micro_f1: prf.f1,
            totals,
            breakdown: error_ratios_counts(&totals).ok(),
            per_document,
            metadata: BTreeMap::new(),
            runtime_ms,
        }
    }

    pub const CSV_HEADER: &'static str = "dataset,precision,recall,f1,over,under,inc_entity,inc_mention";

    /// `dataset,precision,recall,f1,over,under,inc_entity,inc_mention` with
    /// 4-decimal fixed-point values.
    pub fn csv_row(&self) -> String {
        let b = self.breakdown.unwrap_or_default();
        format!(
            "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            csv_field(&self.dataset),
            self.micro_precision,
            self.micro_recall,
            self.micro_f1,
            b.over_ratio,
            b.under_ratio,
            b.incorrect_entity_ratio,
            b.incorrect_mention_ratio
        )
    }

    /// Human-readable `key = value` summary, one pair per line, in a fixed
    /// key order.
    pub fn key_values(&self) -> String {
        let b = self.breakdown;
        let ratio = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
        let t = &self.totals;
        let violations = self.per_document.iter().filter(|d| d.protocol_violation.is_some()).count();
        let lines = [
            ("dataset", self.dataset.clone()),
            ("system", self.system.clone()),
            ("documents", self.per_document.len().to_string()),
            ("gold_annotations", t.gold_count.to_string()),
            ("predicted_annotations", t.pred_count.to_string()),
            ("true_positives", t.true_positives.to_string()),
            ("micro_precision", format!("{:.4}", self.micro_precision)),
            ("micro_recall", format!("{:.4}", self.micro_recall)),
            ("micro_f1", format!("{:.4}", self.micro_f1)),
            ("over_generated", t.over_generated.to_string()),
            ("under_generated", t.under_generated.to_string()),
            ("incorrect_entity", t.incorrect_entity.to_string()),
            ("incorrect_mention", t.incorrect_mention.to_string()),
            ("over_ratio", ratio(b.map(|b| b.over_ratio))),
            ("under_ratio", ratio(b.map(|b| b.under_ratio))),
            ("incorrect_entity_ratio", ratio(b.map(|b| b.incorrect_entity_ratio))),
            ("incorrect_mention_ratio", ratio(b.map(|b| b.incorrect_mention_ratio))),
            ("protocol_violations", violations.to_string()),
        ];
        let mut out: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        for (k, v) in &self.metadata {
            out.push_str(&format!("config.{k} = {v}\n"));
        }
        out.push_str(&format!("runtime_ms = {}\n", self.runtime_ms));
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Change from `baseline` to `ablated` in percentage points:
/// `(100·ΔP, 100·ΔR)`.
pub fn pr_delta(baseline: &EvaluationReport, ablated: &EvaluationReport) -> Result<(f64, f64), EvalError> {
    if baseline.dataset != ablated.dataset {
        return Err(EvalError::DatasetMismatch {
            baseline: baseline.dataset.clone(),
            ablated: ablated.dataset.clone(),
        });
    }
    Ok((
        100.0 * (ablated.micro_precision - baseline.micro_precision),
        100.0 * (ablated.micro_recall - baseline.micro_recall),
    ))
}
