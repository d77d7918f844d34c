//! Run configuration and construction of the reference linkers from it.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use elbench_core::candidates::{load_alias_dictionary, load_full_vocabulary};
use elbench_core::corpus::parse_conll;
use elbench_core::linkers::{
    load_embeddings, CoherenceLinker, CoherenceParams, ConstrainedDecodingLinker, EmbeddingTable, PriorArgmaxLinker,
    TokenMergeLinker, Tokenization,
};
use elbench_core::{CandidatePolicy, ColumnLayout, Corpus, EntityId, Linker, PolicyMode, Vocabulary};

use crate::service::Pipeline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Dict,
    Full,
    Empty,
}

impl From<PolicyArg> for PolicyMode {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Dict => PolicyMode::Dictionary,
            PolicyArg::Full => PolicyMode::FullVocabulary,
            PolicyArg::Empty => PolicyMode::Empty,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum LinkerKind {
    PriorArgmax,
    Coherence,
    TokenMerge,
    Constrained,
}

/// Which reference linker to build and with what resources.
#[derive(Debug, Clone, Args)]
pub struct LinkerConfig {
    /// Candidate regime.
    #[arg(long, value_enum, default_value = "dict")]
    pub policy: PolicyArg,
    /// Alias dictionary TSV (`mention<TAB>entity<TAB>prior`).
    #[arg(long)]
    pub dict_path: Option<PathBuf>,
    /// Entity vocabulary, one id per line.
    #[arg(long)]
    pub vocab_path: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "prior_argmax")]
    pub linker: LinkerKind,
    /// Maximum mention length in tokens.
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    /// Maximum tokens per segment handed to the linker.
    #[arg(long, default_value_t = 512)]
    pub max_tokens: usize,
    /// Candidates re-scored per span by the coherence linker.
    #[arg(long, default_value_t = 30)]
    pub top_p: usize,
    /// Beam width of the constrained linker.
    #[arg(long, default_value_t = 5)]
    pub beam_width: usize,
    /// Word and entity vectors (`key<TAB>v1 v2 ...`) for the coherence linker.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Per-word coherence weights (`word<TAB>beta`).
    #[arg(long)]
    pub beta_path: Option<PathBuf>,
    /// Use whitespace tokenization instead of the CoNLL-style tokenizer.
    #[arg(long)]
    pub whitespace_tokens: bool,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self {
            policy: PolicyArg::Dict,
            dict_path: None,
            vocab_path: None,
            linker: LinkerKind::PriorArgmax,
            n: 5,
            max_tokens: 512,
            top_p: 30,
            beam_width: 5,
            embeddings: None,
            beta_path: None,
            whitespace_tokens: false,
        }
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("cannot open {}", path.display()))
}

impl LinkerConfig {
    pub fn load_policy(&self, mode: PolicyMode) -> Result<CandidatePolicy> {
        Ok(match mode {
            PolicyMode::Dictionary => {
                let Some(path) = &self.dict_path else { bail!("--policy dict requires --dict-path") };
                let dict = load_alias_dictionary(open(path)?).with_context(|| format!("in {}", path.display()))?;
                CandidatePolicy::Dictionary(Arc::new(dict))
            }
            PolicyMode::FullVocabulary => {
                let Some(path) = &self.vocab_path else { bail!("--policy full requires --vocab-path") };
                let vocab = load_full_vocabulary(open(path)?).with_context(|| format!("in {}", path.display()))?;
                CandidatePolicy::FullVocabulary(Arc::new(vocab))
            }
            PolicyMode::Empty => CandidatePolicy::Empty,
        })
    }

    fn tokenization(&self) -> Tokenization {
        if self.whitespace_tokens {
            Tokenization::Whitespace
        } else {
            Tokenization::Conll
        }
    }

    pub fn build_linker(&self, policy: CandidatePolicy) -> Result<Arc<dyn Linker>> {
        let tokenization = self.tokenization();
        Ok(match self.linker {
            LinkerKind::PriorArgmax => Arc::new(PriorArgmaxLinker::new(policy, self.n).with_tokenization(tokenization)),
            LinkerKind::TokenMerge => {
                let mut l = TokenMergeLinker::new(policy, self.n);
                l.tokenization = tokenization;
                Arc::new(l)
            }
            LinkerKind::Constrained => {
                if self.beam_width == 0 {
                    bail!("--beam-width must be at least 1");
                }
                let mut l = ConstrainedDecodingLinker::new(policy, self.n, self.beam_width);
                l.tokenization = tokenization;
                Arc::new(l)
            }
            LinkerKind::Coherence => {
                let embeddings = match &self.embeddings {
                    Some(path) => {
                        load_embeddings::<f32, _>(open(path)?).with_context(|| format!("in {}", path.display()))?
                    }
                    // no vectors: every similarity and coherence term is zero
                    None => EmbeddingTable::new(0),
                };
                let mut params = CoherenceParams::identity(embeddings.dimension());
                if let Some(path) = &self.beta_path {
                    params.beta = load_beta(path)?;
                }
                Arc::new(CoherenceLinker {
                    policy,
                    embeddings,
                    params,
                    top_p: self.top_p,
                    max_span_tokens: self.n,
                    tokenization,
                })
            }
        })
    }

    pub fn system_label(&self, mode: PolicyMode) -> String {
        format!("{}/{}", self.linker_name(), mode)
    }

    pub fn linker_name(&self) -> &'static str {
        match self.linker {
            LinkerKind::PriorArgmax => "prior_argmax",
            LinkerKind::Coherence => "coherence",
            LinkerKind::TokenMerge => "token_merge",
            LinkerKind::Constrained => "constrained",
        }
    }

    pub fn pipeline(&self, mode: PolicyMode) -> Result<Pipeline> {
        let linker = self.build_linker(self.load_policy(mode)?)?;
        Ok(Pipeline::new(linker, self.max_tokens, self.system_label(mode)))
    }

    /// Settings recorded in reports.
    pub fn metadata(&self, mode: PolicyMode) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("linker".into(), self.linker_name().into());
        m.insert("policy".into(), mode.to_string());
        m.insert("n".into(), self.n.to_string());
        m.insert("max_tokens".into(), self.max_tokens.to_string());
        match self.linker {
            LinkerKind::Coherence => {
                m.insert("top_p".into(), self.top_p.to_string());
            }
            LinkerKind::Constrained => {
                m.insert("beam_width".into(), self.beam_width.to_string());
            }
            _ => {}
        }
        if self.whitespace_tokens {
            m.insert("tokenization".into(), "whitespace".into());
        }
        m
    }
}

fn load_beta(path: &Path) -> Result<std::collections::HashMap<String, f32>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut beta = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((word, value)) = line.split_once('\t') else {
            bail!("{}:{}: expected word<TAB>weight", path.display(), i + 1);
        };
        let value: f32 = value.trim().parse().with_context(|| format!("{}:{}", path.display(), i + 1))?;
        beta.insert(word.to_string(), value);
    }
    Ok(beta)
}

/// `conll` (token, BIO, entity in columns 0/1/2), `aida` (0/1/3), or three
/// comma-separated column indices.
pub fn parse_layout(s: &str) -> Result<ColumnLayout, String> {
    match s {
        "conll" => return Ok(ColumnLayout::default()),
        "aida" => return Ok(ColumnLayout::aida_yago()),
        _ => {}
    }
    let cols: Vec<usize> = s
        .split(',')
        .map(|c| c.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| format!("expected conll, aida or TOKEN,BIO,ENTITY column indices, got {s:?}"))?;
    match cols[..] {
        [token, bio, entity] => Ok(ColumnLayout { token, bio, entity }),
        _ => Err(format!("expected three column indices, got {}", cols.len())),
    }
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// CoNLL/AIDA corpus file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Column layout of the corpus.
    #[arg(long, value_parser = parse_layout, default_value = "conll")]
    pub layout: ColumnLayout,
    /// Dataset name in reports; defaults to the corpus file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Knowledge-base entity list for InKB scoring; without it every
    /// non-None entity counts.
    #[arg(long)]
    pub kb_path: Option<PathBuf>,
}

impl CorpusArgs {
    pub fn load(&self) -> Result<Corpus> {
        let name = self.dataset.clone().unwrap_or_else(|| dataset_name(&self.corpus));
        parse_conll(open(&self.corpus)?, &name, &self.layout).with_context(|| format!("in {}", self.corpus.display()))
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        load_kb(self.kb_path.as_deref())
    }
}

pub fn dataset_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "corpus".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn load_kb(path: Option<&Path>) -> Result<Vocabulary> {
    let Some(path) = path else { return Ok(Vocabulary::Any) };
    let vocab = load_full_vocabulary(open(path)?).with_context(|| format!("in {}", path.display()))?;
    Ok(Vocabulary::closed(vocab.entities().iter().filter(|e| !e.is_none()).cloned().collect::<Vec<EntityId>>()))
}

/// Everything `run` needs.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[command(flatten)]
    pub linker: LinkerConfig,
    /// Drive a running annotator service instead of an in-process linker.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "elbench-out")]
    pub out: PathBuf,
    /// Recorded in reports; the reference linkers are deterministic.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Documents annotated concurrently (1 = sequential).
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}
