//! `elbench` command line.
//!
//! ```text
//! elbench serve  --dict-path aliases.tsv --endpoint 127.0.0.1:8080
//! elbench run    --corpus test.conll --dict-path aliases.tsv --out out/
//! elbench run    --corpus test.conll --endpoint http://127.0.0.1:8080 --out out/
//! elbench ablate --corpus test.conll --dict-path aliases.tsv --vocab-path vocab.txt --out out/
//! elbench score  --gold test.conll --pred out/predictions.jsonl --out scored/
//! ```

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use elbench_core::corpus::parse_conll;
use elbench_core::corpus::DOCSTART;
use elbench_core::evaluation::DocumentSummary;
use elbench_core::{AnnotatedDocument, Annotation, ColumnLayout, EvaluationReport, PolicyMode, Vocabulary};

use crate::annotator::{Annotator, HttpAnnotator, InProcessAnnotator, DEFAULT_TIMEOUT};
use crate::config::{dataset_name, load_kb, parse_layout, CorpusArgs, LinkerConfig, RunConfig};
use crate::report::{
    emit_comparison, emit_report, write_predictions, write_report_json, PREDICTIONS_JSONL, REPORT_JSON,
};
use crate::runner::{run_benchmark_detailed, score_document, PredictionRecord, RunOptions};
use crate::service::{serve, Health};
use crate::wire::AnnotateResponse;

#[derive(Debug, Parser)]
#[command(name = "elbench", version, about = "Black-box entity linking evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve a reference linker over HTTP.
    Serve(ServeArgs),
    /// Annotate a corpus and score it.
    Run(RunConfig),
    /// Run a corpus under the dict, full and empty candidate policies and
    /// compare.
    Ablate(AblateArgs),
    /// Score a prediction file against gold offline.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub linker: LinkerConfig,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub endpoint: String,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub linker: LinkerConfig,
    #[arg(long, default_value = "elbench-out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Gold annotations: CoNLL corpus or JSONL records with `text`.
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions: CoNLL corpus or JSONL records.
    #[arg(long)]
    pub pred: PathBuf,
    /// Column layout for CoNLL inputs.
    #[arg(long, value_parser = parse_layout, default_value = "conll")]
    pub layout: ColumnLayout,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long)]
    pub kb_path: Option<PathBuf>,
    #[arg(long, default_value = "elbench-out")]
    pub out: PathBuf,
}

/// Parses `argv` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on failure, 2 on usage errors.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Serve(args) => run_serve(&args),
        Command::Run(cfg) => run_run(&cfg),
        Command::Ablate(args) => run_ablate(&args),
        Command::Score(args) => run_score(&args),
    }
}

fn run_serve(args: &ServeArgs) -> Result<()> {
    let mode = PolicyMode::from(args.linker.policy);
    let pipeline = Arc::new(args.linker.pipeline(mode)?);
    eprintln!("serving {} on http://{}", pipeline.system, args.endpoint);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(serve(pipeline, &args.endpoint))?;
    Ok(())
}

fn remote_system_label(endpoint: &str) -> String {
    let base = endpoint.trim_end_matches('/').trim_end_matches("/annotate");
    let base = if base.contains("://") { base.to_string() } else { format!("http://{base}") };
    reqwest::blocking::get(format!("{base}/health"))
        .ok()
        .and_then(|r| r.json::<Health>().ok())
        .map_or_else(|| endpoint.to_string(), |h| h.system)
}

fn run_run(cfg: &RunConfig) -> Result<()> {
    let corpus = cfg.corpus.load()?;
    let mode = PolicyMode::from(cfg.linker.policy);
    let mut options = RunOptions {
        system: String::new(),
        vocabulary: cfg.corpus.vocabulary()?,
        parallel: cfg.parallel,
        metadata: BTreeMap::new(),
    };
    let annotator: Box<dyn Annotator> = match &cfg.endpoint {
        Some(endpoint) => {
            options.system = remote_system_label(endpoint);
            options.metadata.insert("endpoint".into(), endpoint.clone());
            Box::new(HttpAnnotator::new(endpoint, DEFAULT_TIMEOUT)?)
        }
        None => {
            let pipeline = Arc::new(cfg.linker.pipeline(mode)?);
            options.system = pipeline.system.clone();
            options.metadata = cfg.linker.metadata(mode);
            Box::new(InProcessAnnotator::new(pipeline))
        }
    };
    options.metadata.insert("seed".into(), cfg.seed.to_string());
    let run = run_benchmark_detailed(&corpus, annotator.as_ref(), &options)?;
    emit_report(&run.report, None, &cfg.out)?;
    write_report_json(&run.report, &cfg.out.join(REPORT_JSON))?;
    write_predictions(&run.predictions, &cfg.out.join(PREDICTIONS_JSONL))?;
    print_report(&run.report);
    Ok(())
}

fn print_report(report: &EvaluationReport) {
    println!("{}", EvaluationReport::CSV_HEADER);
    println!("{}", report.csv_row());
    let violations = report.per_document.iter().filter(|d| d.protocol_violation.is_some()).count();
    if violations > 0 {
        eprintln!("warning: {violations} document(s) scored with zero predictions after protocol violations");
    }
}

/// Policy order of the `ablate` comparison; the first is the baseline.
pub const ABLATION_ORDER: [PolicyMode; 3] = [PolicyMode::Dictionary, PolicyMode::FullVocabulary, PolicyMode::Empty];

fn run_ablate(args: &AblateArgs) -> Result<()> {
    if args.linker.dict_path.is_none() || args.linker.vocab_path.is_none() {
        bail!("ablate needs both --dict-path and --vocab-path");
    }
    let corpus = args.corpus.load()?;
    let vocabulary = args.corpus.vocabulary()?;
    let mut reports = Vec::with_capacity(ABLATION_ORDER.len());
    for mode in ABLATION_ORDER {
        let pipeline = Arc::new(args.linker.pipeline(mode)?);
        let mut metadata = args.linker.metadata(mode);
        metadata.insert("seed".into(), args.seed.to_string());
        let options = RunOptions {
            system: pipeline.system.clone(),
            vocabulary: vocabulary.clone(),
            parallel: args.parallel,
            metadata,
        };
        let run = run_benchmark_detailed(&corpus, &InProcessAnnotator::new(pipeline), &options)?;
        let dir = args.out.join(mode.to_string());
        let pair = reports.first().map(|base: &EvaluationReport| (base, &run.report));
        emit_report(&run.report, pair, &dir)?;
        write_report_json(&run.report, &dir.join(REPORT_JSON))?;
        write_predictions(&run.predictions, &dir.join(PREDICTIONS_JSONL))?;
        reports.push(run.report);
    }
    emit_comparison(&reports, &args.out)?;
    println!("system,{}", EvaluationReport::CSV_HEADER);
    for r in &reports {
        println!("{},{}", r.system, r.csv_row());
    }
    Ok(())
}

fn is_conll(path: &Path) -> Result<bool> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            return Ok(line.trim_start().starts_with(DOCSTART));
        }
    }
    Ok(false)
}

fn read_jsonl(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn read_conll_records(path: &Path, layout: &ColumnLayout) -> Result<Vec<PredictionRecord>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let corpus = parse_conll(file, &dataset_name(path), layout).with_context(|| format!("in {}", path.display()))?;
    Ok(corpus
        .documents
        .into_iter()
        .map(|d| PredictionRecord {
            annotations: AnnotateResponse::from_annotations(&d.document.gold).annotations,
            doc_id: d.document.doc_id,
            text: Some(d.document.text),
        })
        .collect())
}

fn read_records(path: &Path, layout: &ColumnLayout) -> Result<Vec<PredictionRecord>> {
    if is_conll(path)? {
        read_conll_records(path, layout)
    } else {
        read_jsonl(path)
    }
}

/// Scores prediction records against gold documents matched by `doc_id`.
/// Gold documents without a prediction record, and records whose spans do
/// not fit the gold text, are scored with zero predictions.
pub fn score_records(
    dataset: &str,
    gold: &[AnnotatedDocument],
    predictions: &[PredictionRecord],
    vocabulary: &Vocabulary,
) -> Result<EvaluationReport> {
    let by_id: HashMap<&str, &PredictionRecord> = predictions.iter().map(|p| (p.doc_id.as_str(), p)).collect();
    let mut per_document: Vec<DocumentSummary> = Vec::with_capacity(gold.len());
    for doc in gold {
        let outcome: Result<Vec<Annotation>, String> = match by_id.get(doc.doc_id.as_str()) {
            Some(record) => AnnotateResponse { annotations: record.annotations.clone() }
                .to_annotations(&doc.text)
                .map_err(|e| e.to_string()),
            None => Err("no prediction record".to_string()),
        };
        per_document.push(score_document(doc, outcome, vocabulary)?.0);
    }
    Ok(EvaluationReport::from_documents(dataset, "offline", per_document, 0))
}

fn run_score(args: &ScoreArgs) -> Result<()> {
    let gold_records = read_records(&args.gold, &args.layout)?;
    let mut gold = Vec::with_capacity(gold_records.len());
    for r in gold_records {
        let Some(text) = r.text.clone() else {
            bail!("gold record {:?} has no text", r.doc_id);
        };
        let annotations = AnnotateResponse { annotations: r.annotations }
            .to_annotations(&text)
            .with_context(|| format!("gold document {:?}", r.doc_id))?;
        gold.push(AnnotatedDocument::new(r.doc_id, text, annotations, Vec::new())?);
    }
    let predictions = read_records(&args.pred, &args.layout)?;
    let dataset = args.dataset.clone().unwrap_or_else(|| dataset_name(&args.gold));
    let vocabulary = load_kb(args.kb_path.as_deref())?;
    let report = score_records(&dataset, &gold, &predictions, &vocabulary)?;
    emit_report(&report, None, &args.out)?;
    write_report_json(&report, &args.out.join(REPORT_JSON))?;
    print_report(&report);
    Ok(())
}
