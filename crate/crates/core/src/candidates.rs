//! Candidate-set resources and the three ablation regimes.
//!
//! Alias dictionary TSV: `mention<TAB>entity_id<TAB>prior`, UTF-8, one entry
//! per line, `#` comment lines and blank lines ignored. Full-vocabulary file:
//! one entity id per line.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Read};
use std::sync::Arc;

use thiserror::Error;

use crate::model::{EntityId, ModelError};

/// Slack allowed on the per-mention prior sum.
pub const PRIOR_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CandidateError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: prior {prior} outside [0, 1]")]
    PriorOutOfRange { line: usize, prior: f64 },
    #[error("priors for mention {mention:?} sum to {sum} > 1")]
    PriorMassExceeded { mention: String, sum: f64 },
    #[error("full vocabulary is empty")]
    EmptyVocabulary,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub entity: EntityId,
    pub prior: f64,
}

/// Descending prior, ties broken by ascending entity id.
fn candidate_order(a: &Candidate, b: &Candidate) -> std::cmp::Ordering {
    b.prior.total_cmp(&a.prior).then_with(|| a.entity.cmp(&b.entity))
}

/// Candidates for one mention surface. The list is shared, so cloning a set
/// is cheap even for a full in-domain vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub mention: String,
    pub candidates: Arc<[Candidate]>,
}

impl CandidateSet {
    pub fn empty(mention: &str) -> Self {
        Self { mention: mention.to_string(), candidates: Arc::from(Vec::new()) }
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    /// Highest prior, ties to the lexicographically smallest id. This is
    /// just the head of the list.
    pub fn best(&self) -> Option<&Candidate> {
        self.candidates.first()
    }

    pub fn contains(&self, entity: &EntityId) -> bool {
        self.candidates.iter().any(|c| &c.entity == entity)
    }
}

/// Mention surface -> prior-weighted candidate entities.
#[derive(Debug, Clone, Default)]
pub struct AliasDictionary {
    entries: HashMap<String, Arc<[Candidate]>>,
    /// lowercased surface -> smallest original surface with that lowercase form
    folded: HashMap<String, String>,
    vocabulary: BTreeSet<EntityId>,
}

impl AliasDictionary {
    /// Builds from `(mention, entity, prior)` triples. Duplicate
    /// `(mention, entity)` pairs keep the maximum prior. Priors are not
    /// renormalized.
    pub fn from_entries(entries: impl IntoIterator<Item = (String, EntityId, f64)>) -> Result<Self, CandidateError> {
        let mut grouped: BTreeMap<String, BTreeMap<EntityId, f64>> = BTreeMap::new();
        for (i, (mention, entity, prior)) in entries.into_iter().enumerate() {
            if !(0.0..=1.0).contains(&prior) {
                return Err(CandidateError::PriorOutOfRange { line: i + 1, prior });
            }
            let slot = grouped.entry(mention).or_default().entry(entity).or_insert(prior);
            *slot = slot.max(prior);
        }
        let mut dict = AliasDictionary::default();
        for (mention, by_entity) in grouped {
            let sum: f64 = by_entity.values().sum();
            if sum > 1.0 + PRIOR_MASS_TOLERANCE {
                return Err(CandidateError::PriorMassExceeded { mention, sum });
            }
            let mut list: Vec<Candidate> =
                by_entity.into_iter().map(|(entity, prior)| Candidate { entity, prior }).collect();
            list.sort_by(candidate_order);
            dict.vocabulary.extend(list.iter().map(|c| c.entity.clone()));
            // BTreeMap iteration is sorted, so the first surface wins
            dict.folded.entry(mention.to_lowercase()).or_insert_with(|| mention.clone());
            dict.entries.insert(mention, Arc::from(list));
        }
        Ok(dict)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vocabulary(&self) -> &BTreeSet<EntityId> {
        &self.vocabulary
    }

    /// Exact surface match first, then a lowercase fallback.
    pub fn lookup(&self, mention: &str) -> Option<&Arc<[Candidate]>> {
        self.entries
            .get(mention)
            .or_else(|| self.folded.get(&mention.to_lowercase()).and_then(|surface| self.entries.get(surface)))
    }

    pub fn mentions(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Reads the alias dictionary TSV format.
pub fn load_alias_dictionary<R: Read>(input: R) -> Result<AliasDictionary, CandidateError> {
    let mut triples = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let malformed = |reason: String| CandidateError::MalformedLine { line: lineno, reason };
        if fields.len() != 3 {
            return Err(malformed(format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        if fields[0].is_empty() {
            return Err(malformed("empty mention".into()));
        }
        let entity = EntityId::new(fields[1]).map_err(|e| malformed(e.to_string()))?;
        let prior: f64 = fields[2].trim().parse().map_err(|_| malformed(format!("bad prior {:?}", fields[2])))?;
        if !(0.0..=1.0).contains(&prior) {
            return Err(CandidateError::PriorOutOfRange { line: lineno, prior });
        }
        triples.push((fields[0].to_string(), entity, prior));
    }
    AliasDictionary::from_entries(triples)
}

/// The fixed in-domain entity vocabulary, offered to every mention with a
/// uniform prior. *None* is kept in the vocabulary but never offered.
#[derive(Debug, Clone)]
pub struct FullVocabulary {
    entities: BTreeSet<EntityId>,
    candidates: Arc<[Candidate]>,
}

impl FullVocabulary {
    pub fn new(entities: impl IntoIterator<Item = EntityId>) -> Result<Self, CandidateError> {
        let entities: BTreeSet<EntityId> = entities.into_iter().collect();
        let offered: Vec<&EntityId> = entities.iter().filter(|e| !e.is_none()).collect();
        if offered.is_empty() {
            return Err(CandidateError::EmptyVocabulary);
        }
        let prior = 1.0 / offered.len() as f64;
        let candidates: Vec<Candidate> = offered.into_iter().map(|e| Candidate { entity: e.clone(), prior }).collect();
        Ok(Self { entities, candidates: Arc::from(candidates) })
    }

    /// All entities including *None* if it was listed.
    pub fn entities(&self) -> &BTreeSet<EntityId> {
        &self.entities
    }

    pub fn candidates(&self) -> &Arc<[Candidate]> {
        &self.candidates
    }
}

/// Reads one entity id per line; blank and `#` lines are skipped.
pub fn load_full_vocabulary<R: Read>(input: R) -> Result<FullVocabulary, CandidateError> {
    let mut ids = Vec::new();
    for (i, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let id =
            EntityId::new(line).map_err(|e| CandidateError::MalformedLine { line: i + 1, reason: e.to_string() })?;
        ids.push(id);
    }
    FullVocabulary::new(ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    #[serde(rename = "dict")]
    Dictionary,
    #[serde(rename = "full")]
    FullVocabulary,
    Empty,
}

impl std::fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PolicyMode::Dictionary => "dict",
            PolicyMode::FullVocabulary => "full",
            PolicyMode::Empty => "empty",
        })
    }
}

/// Which candidate regime is in force. Each mode carries the resource it
/// needs, so a Dictionary policy without a dictionary cannot be built.
#[derive(Debug, Clone)]
pub enum CandidatePolicy {
    Dictionary(Arc<AliasDictionary>),
    FullVocabulary(Arc<FullVocabulary>),
    Empty,
}

impl CandidatePolicy {
    pub fn mode(&self) -> PolicyMode {
        match self {
            CandidatePolicy::Dictionary(_) => PolicyMode::Dictionary,
            CandidatePolicy::FullVocabulary(_) => PolicyMode::FullVocabulary,
            CandidatePolicy::Empty => PolicyMode::Empty,
        }
    }
}

/// Candidate lookup under a policy.
///
/// Dictionary: two-stage lookup, missing mentions get no candidates.
/// FullVocabulary: the same uniform list for every mention. Empty: nothing.
pub fn candidates_for(mention: &str, policy: &CandidatePolicy) -> CandidateSet {
    match policy {
        CandidatePolicy::Dictionary(dict) => match dict.lookup(mention) {
            Some(list) => CandidateSet { mention: mention.to_string(), candidates: Arc::clone(list) },
            None => CandidateSet::empty(mention),
        },
        CandidatePolicy::FullVocabulary(vocab) => {
            CandidateSet { mention: mention.to_string(), candidates: Arc::clone(vocab.candidates()) }
        }
        CandidatePolicy::Empty => CandidateSet::empty(mention),
    }
}

/// A symbol on a trie edge: a character, or the end-of-entity marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrieSymbol {
    End,
    Char(char),
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: BTreeMap<char, usize>,
    terminal: bool,
}

/// Character-level prefix tree over entity ids.
#[derive(Debug, Clone)]
pub struct EntityTrie {
    nodes: Vec<TrieNode>,
    len: usize,
}

impl Default for EntityTrie {
    fn default() -> Self {
        Self { nodes: vec![TrieNode::default()], len: 0 }
    }
}

impl EntityTrie {
    pub const ROOT: usize = 0;

    pub fn insert(&mut self, id: &str) {
        let mut node = Self::ROOT;
        for c in id.chars() {
            node = match self.nodes[node].children.get(&c) {
                Some(&next) => next,
                None => {
                    self.nodes.push(TrieNode::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(c, next);
                    next
                }
            };
        }
        if !self.nodes[node].terminal {
            self.nodes[node].terminal = true;
            self.len += 1;
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Number of distinct entities stored.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Node reached by following `prefix` from the root.
    pub fn node(&self, prefix: &str) -> Option<usize> {
        prefix.chars().try_fold(Self::ROOT, |n, c| self.child(n, c))
    }

    pub fn child(&self, node: usize, c: char) -> Option<usize> {
        self.nodes.get(node)?.children.get(&c).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.node(id).is_some_and(|n| self.nodes[n].terminal)
    }

    /// Valid continuations of a node, `End` first, then characters in order.
    pub fn symbols_at(&self, node: usize) -> Vec<TrieSymbol> {
        let n = &self.nodes[node];
        let mut out = Vec::with_capacity(n.children.len() + 1);
        if n.terminal {
            out.push(TrieSymbol::End);
        }
        out.extend(n.children.keys().map(|&c| TrieSymbol::Char(c)));
        out
    }

    /// Valid next symbols after `prefix`; `None` if the prefix leaves the trie.
    pub fn next_symbols(&self, prefix: &str) -> Option<BTreeSet<TrieSymbol>> {
        self.node(prefix).map(|n| self.symbols_at(n).into_iter().collect())
    }
}

pub fn build_trie<'a>(entities: impl IntoIterator<Item = &'a EntityId>) -> EntityTrie {
    let mut trie = EntityTrie::default();
    for e in entities {
        trie.insert(e.as_str());
    }
    trie
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn eid(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    #[test]
    fn load_sorts_by_prior() {
        let dict = load_alias_dictionary("japan\tJAPAN_COUNTRY\t0.4\njapan\tJAPAN_NT\t0.6\n".as_bytes()).unwrap();
        let list = dict.lookup("japan").unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].entity, eid("JAPAN_NT"));
        assert_eq!(dict.vocabulary().len(), 2);
    }

    #[test]
    fn load_empty_and_comments() {
        assert!(load_alias_dictionary("".as_bytes()).unwrap().is_empty());
        assert!(load_alias_dictionary("# header\n\n".as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn duplicate_lines_keep_max_prior() {
        let dict = load_alias_dictionary("x\tA\t0.3\nx\tA\t0.5\n".as_bytes()).unwrap();
        let list = dict.lookup("x").unwrap();
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].prior, 0.5);
    }

    #[test]
    fn ties_break_lexicographically() {
        let dict = load_alias_dictionary("x\tZeta\t0.5\nx\tAlpha\t0.5\n".as_bytes()).unwrap();
        assert_eq!(dict.lookup("x").unwrap()[0].entity, eid("Alpha"));
    }

    #[test]
    fn load_errors() {
        assert!(matches!(
            load_alias_dictionary("x\tA\n".as_bytes()),
            Err(CandidateError::MalformedLine { line: 1, .. })
        ));
        assert!(matches!(load_alias_dictionary("x\tA\tabc\n".as_bytes()), Err(CandidateError::MalformedLine { .. })));
        assert!(matches!(
            load_alias_dictionary("# c\nx\tA\t1.5\n".as_bytes()),
            Err(CandidateError::PriorOutOfRange { line: 2, .. })
        ));
        assert!(matches!(
            load_alias_dictionary("x\tA\t-0.1\n".as_bytes()),
            Err(CandidateError::PriorOutOfRange { .. })
        ));
        assert!(matches!(
            load_alias_dictionary("x\tA\t0.7\nx\tB\t0.7\n".as_bytes()),
            Err(CandidateError::PriorMassExceeded { .. })
        ));
    }

    #[test]
    fn lowercase_fallback() {
        let dict = load_alias_dictionary("Japan\tJ\t0.9\njapan\tj\t0.9\nSyria\tS\t1\n".as_bytes()).unwrap();
        let policy = CandidatePolicy::Dictionary(Arc::new(dict));
        assert_eq!(candidates_for("japan", &policy).best().unwrap().entity, eid("j"));
        assert_eq!(candidates_for("Japan", &policy).best().unwrap().entity, eid("J"));
        // "JAPAN" folds to "japan"; the smallest original surface is "Japan"
        assert_eq!(candidates_for("JAPAN", &policy).best().unwrap().entity, eid("J"));
        assert_eq!(candidates_for("SYRIA", &policy).best().unwrap().entity, eid("S"));
        assert!(candidates_for("Iraq", &policy).is_empty());
    }

    #[test]
    fn full_vocabulary_uniform() {
        let vocab = FullVocabulary::new([eid("B"), eid("A"), EntityId::none()]).unwrap();
        let policy = CandidatePolicy::FullVocabulary(Arc::new(vocab));
        let set = candidates_for("anything", &policy);
        assert_eq!(set.len(), 2);
        assert!(set.candidates.iter().all(|c| c.prior == 0.5));
        assert_eq!(set.best().unwrap().entity, eid("A"));
        assert!(FullVocabulary::new([EntityId::none()]).is_err());
    }

    #[test]
    fn full_vocabulary_file() {
        let vocab = load_full_vocabulary("A\n\n# x\n--NME--\nB\n".as_bytes()).unwrap();
        assert_eq!(vocab.entities().len(), 3);
        assert_eq!(vocab.candidates().len(), 2);
    }

    #[test]
    fn empty_policy_is_empty() {
        assert!(candidates_for("Japan", &CandidatePolicy::Empty).is_empty());
    }

    #[test]
    fn trie_examples() {
        let trie = build_trie(&[eid("Japan")]);
        assert!(trie.contains("Japan"));
        assert!(!trie.contains("Jap"));

        let trie = build_trie(&[eid("Japan"), eid("Japan_NFT")]);
        let next = trie.next_symbols("Japan").unwrap();
        assert_eq!(next, [TrieSymbol::End, TrieSymbol::Char('_')].into_iter().collect());
        assert_eq!(trie.len(), 2);

        let trie = build_trie(&[]);
        assert!(trie.is_empty());
        assert!(!trie.contains(""));
        assert!(!trie.contains("Japan"));
    }

    proptest! {
        #[test]
        fn full_vocabulary_is_mention_independent(a in "\\PC{0,10}", b in "\\PC{0,10}") {
            let vocab = FullVocabulary::new([eid("X"), eid("Y"), eid("Z")]).unwrap();
            let policy = CandidatePolicy::FullVocabulary(Arc::new(vocab));
            let (sa, sb) = (candidates_for(&a, &policy), candidates_for(&b, &policy));
            prop_assert_eq!(&sa.candidates, &sb.candidates);
            let max = sa.candidates.iter().map(|c| c.prior).fold(f64::MIN, f64::max);
            let min = sa.candidates.iter().map(|c| c.prior).fold(f64::MAX, f64::min);
            prop_assert_eq!(max - min, 0.0);
        }

        #[test]
        fn dictionary_is_line_order_invariant(
            lines in prop::collection::vec((0usize..3, 0usize..4, 0u32..=20), 0..12),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            // keep each mention's mass <= 1 by scaling with the entity count
            let text: Vec<String> = lines
                .iter()
                .map(|(m, e, p)| format!("m{m}\tE{e}\t{}", *p as f64 / 80.0))
                .collect();
            let mut shuffled = text.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = load_alias_dictionary(text.join("\n").as_bytes()).unwrap();
            let b = load_alias_dictionary(shuffled.join("\n").as_bytes()).unwrap();
            for m in 0..3 {
                let key = format!("m{m}");
                prop_assert_eq!(a.lookup(&key), b.lookup(&key));
            }
        }
    }
}
