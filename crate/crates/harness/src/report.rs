//! Report files.
//!
//! | file               | content                                                      |
//! |--------------------|--------------------------------------------------------------|
//! | `report.csv`       | `dataset,precision,recall,f1,over,under,inc_entity,inc_mention` |
//! | `summary.txt`      | `key = value` lines, one block per report                    |
//! | `error_ratios.csv` | `system,over,under,inc_entity,inc_mention` (stacked-bar data) |
//! | `pr_delta.csv`     | `system,baseline,precision_delta_pp,recall_delta_pp`          |
//!
//! All numbers are fixed-point with 4 decimals; deltas carry an explicit sign.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use elbench_core::evaluation::pr_delta;
use elbench_core::EvaluationReport;

use crate::runner::PredictionRecord;

pub const REPORT_CSV: &str = "report.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const ERROR_RATIOS_CSV: &str = "error_ratios.csv";
pub const PR_DELTA_CSV: &str = "pr_delta.csv";
pub const REPORT_JSON: &str = "report.json";
pub const PREDICTIONS_JSONL: &str = "predictions.jsonl";

pub const ERROR_RATIOS_HEADER: &str = "system,over,under,inc_entity,inc_mention";
pub const PR_DELTA_HEADER: &str = "system,baseline,precision_delta_pp,recall_delta_pp";

pub fn error_ratio_row(report: &EvaluationReport) -> String {
    let cells = match report.breakdown {
        Some(b) => [b.over_ratio, b.under_ratio, b.incorrect_entity_ratio, b.incorrect_mention_ratio]
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(","),
        None => "n/a,n/a,n/a,n/a".to_string(),
    };
    format!("{},{cells}", report.system)
}

pub fn pr_delta_row(baseline: &EvaluationReport, ablated: &EvaluationReport) -> io::Result<String> {
    let (dp, dr) = pr_delta(baseline, ablated).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    Ok(format!("{},{},{dp:+.4},{dr:+.4}", ablated.system, baseline.system))
}

fn write_lines(path: &Path, header: &str, rows: &[String]) -> io::Result<PathBuf> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for row in rows {
        out.push_str(row);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(path.to_path_buf())
}

/// Writes `report.csv`, `summary.txt` and `error_ratios.csv` for one report,
/// plus `pr_delta.csv` when a `(baseline, ablated)` pair is given. Returns
/// the written paths.
pub fn emit_report(
    report: &EvaluationReport,
    ablation_pair: Option<(&EvaluationReport, &EvaluationReport)>,
    out_dir: &Path,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = vec![
        write_lines(&out_dir.join(REPORT_CSV), EvaluationReport::CSV_HEADER, &[report.csv_row()])?,
        {
            let path = out_dir.join(SUMMARY_TXT);
            fs::write(&path, report.key_values())?;
            path
        },
        write_lines(&out_dir.join(ERROR_RATIOS_CSV), ERROR_RATIOS_HEADER, &[error_ratio_row(report)])?,
    ];
    if let Some((baseline, ablated)) = ablation_pair {
        let row = pr_delta_row(baseline, ablated)?;
        written.push(write_lines(&out_dir.join(PR_DELTA_CSV), PR_DELTA_HEADER, &[row])?);
    }
    Ok(written)
}

/// Comparison files for several runs of one corpus, the first being the
/// baseline: one `error_ratios.csv` row per run, one `pr_delta.csv` row per
/// non-baseline run, and all summaries concatenated.
pub fn emit_comparison(reports: &[EvaluationReport], out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let Some((baseline, rest)) = reports.split_first() else {
        return Ok(Vec::new());
    };
    let ratio_rows: Vec<String> = reports.iter().map(error_ratio_row).collect();
    let delta_rows = rest.iter().map(|r| pr_delta_row(baseline, r)).collect::<io::Result<Vec<_>>>()?;
    let summary = reports.iter().map(EvaluationReport::key_values).collect::<Vec<_>>().join("\n");
    let summary_path = out_dir.join(SUMMARY_TXT);
    fs::write(&summary_path, summary)?;
    Ok(vec![
        write_lines(&out_dir.join(ERROR_RATIOS_CSV), ERROR_RATIOS_HEADER, &ratio_rows)?,
        write_lines(&out_dir.join(PR_DELTA_CSV), PR_DELTA_HEADER, &delta_rows)?,
        summary_path,
    ])
}

pub fn write_report_json(report: &EvaluationReport, path: &Path) -> io::Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
    fs::write(path, json + "\n")
}

pub fn write_predictions(records: &[PredictionRecord], path: &Path) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(io::Error::other)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
