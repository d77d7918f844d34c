//! Independent oracles and random instance generators shared by the
//! integration and acceptance tests. Nothing here calls the code paths it is
//! used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use elbench_core::candidates::TrieSymbol;
use elbench_core::{Annotation, EntityId, Span};
use rand::Rng;

type Rule = fn(&Annotation, &Annotation) -> bool;

pub const ENTITIES: [&str; 5] = ["E0", "E1", "E2", "E3", "E4"];

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OracleCounts {
    pub tp: usize,
    pub incorrect_entity: usize,
    pub incorrect_mention: usize,
    pub over: usize,
    pub under: usize,
    pub gold: usize,
    pub pred: usize,
}

fn key(a: &Annotation) -> (usize, usize, String) {
    (a.span.begin, a.span.end, a.entity.as_str().to_string())
}

fn in_kb(a: &Annotation, vocab: Option<&BTreeSet<String>>) -> bool {
    a.entity.as_str() != "--NME--" && vocab.is_none_or(|v| v.contains(a.entity.as_str()))
}

fn overlap(a: &Annotation, b: &Annotation) -> bool {
    a.span.begin.max(b.span.begin) < a.span.end.min(b.span.end)
}

/// The five passes by exhaustive pairwise search over plain vectors.
pub fn brute_force_match(gold: &[Annotation], pred: &[Annotation], vocab: Option<&BTreeSet<String>>) -> OracleCounts {
    let mut g: Vec<Annotation> = gold.iter().filter(|a| in_kb(a, vocab)).cloned().collect();
    g.sort_by_key(key);
    g.dedup();
    let mut p: Vec<Annotation> = pred.iter().filter(|a| in_kb(a, vocab)).cloned().collect();
    p.sort_by_key(key);

    let mut gold_used = vec![false; g.len()];
    let mut pred_class = vec![0u8; p.len()]; // 0 = unassigned
    let mut out = OracleCounts { gold: g.len(), pred: p.len(), ..Default::default() };

    // pass 1..3 share one shape: first unused gold satisfying `rule`
    let rules: [(u8, Rule); 3] = [
        (1, |pr, go| pr.span.begin == go.span.begin && pr.span.end == go.span.end && pr.entity == go.entity),
        (2, |pr, go| pr.span.begin == go.span.begin && pr.span.end == go.span.end),
        (3, |pr, go| pr.entity == go.entity && overlap(pr, go)),
    ];
    for (class, rule) in rules {
        for pi in 0..p.len() {
            if pred_class[pi] != 0 {
                continue;
            }
            for gi in 0..g.len() {
                if !gold_used[gi] && rule(&p[pi], &g[gi]) {
                    gold_used[gi] = true;
                    pred_class[pi] = class;
                    break;
                }
            }
        }
    }
    for c in &pred_class {
        match c {
            1 => out.tp += 1,
            2 => out.incorrect_entity += 1,
            3 => out.incorrect_mention += 1,
            _ => out.over += 1,
        }
    }
    for gi in 0..g.len() {
        if !gold_used[gi] && p.iter().all(|pr| !overlap(pr, &g[gi])) {
            out.under += 1;
        }
    }
    out
}

pub fn ann(b: usize, e: usize, id: &str) -> Annotation {
    Annotation::new(Span::new(b, e).unwrap(), EntityId::new(id).unwrap())
}

/// Non-overlapping gold over a `doc_len`-character document.
pub fn random_gold<R: Rng>(rng: &mut R, doc_len: usize, max: usize) -> Vec<Annotation> {
    let mut out = Vec::new();
    let mut pos = 0;
    let target = rng.gen_range(0..=max);
    while out.len() < target && pos < doc_len {
        let start = pos + rng.gen_range(0..8);
        let len = rng.gen_range(1..8);
        if start + len > doc_len {
            break;
        }
        out.push(ann(start, start + len, ENTITIES[rng.gen_range(0..ENTITIES.len())]));
        pos = start + len;
    }
    out
}

/// Predictions that are perturbed copies of gold plus random spans; may
/// overlap and may contain *None* links.
pub fn random_pred<R: Rng>(rng: &mut R, gold: &[Annotation], doc_len: usize, max: usize) -> Vec<Annotation> {
    let mut out = Vec::new();
    let target = rng.gen_range(0..=max);
    while out.len() < target {
        let choice = rng.gen_range(0..5);
        let entity = if rng.gen_bool(0.05) { "--NME--" } else { ENTITIES[rng.gen_range(0..ENTITIES.len())] };
        if choice < 3 && !gold.is_empty() {
            let g = &gold[rng.gen_range(0..gold.len())];
            let (mut b, mut e) = (g.span.begin, g.span.end);
            match choice {
                0 => out.push(g.clone()),
                1 => out.push(ann(b, e, entity)),
                _ => {
                    if rng.gen_bool(0.5) && b > 0 {
                        b -= 1;
                    } else if e < doc_len {
                        e += 1;
                    } else if e - b > 1 {
                        e -= 1;
                    }
                    let id = if rng.gen_bool(0.7) { g.entity.as_str() } else { entity };
                    out.push(ann(b, e, id));
                }
            }
        } else {
            let b = rng.gen_range(0..doc_len - 1);
            let e = rng.gen_range(b + 1..=doc_len.min(b + 10));
            out.push(ann(b, e, entity));
        }
    }
    out
}

/// Random set of short ids over a small alphabet so prefixes are shared.
pub fn random_id_set<R: Rng>(rng: &mut R, max: usize) -> BTreeSet<String> {
    let alphabet = ['a', 'b', 'c', '_'];
    let n = rng.gen_range(1..=max);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..7);
            let mut s: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
            if s.starts_with('_') {
                s.replace_range(0..1, "a");
            }
            s
        })
        .collect()
}

/// Deterministic pseudo-random score for `(prefix, symbol)` from a seed.
pub fn table_score(seed: u64, prefix: &str, symbol: TrieSymbol) -> f64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    seed.hash(&mut h);
    prefix.hash(&mut h);
    symbol.hash(&mut h);
    -((h.finish() % 10_000) as f64) / 1000.0
}

/// Greedy constrained decoding computed from the plain id set: at every step
/// take the continuation with the best cumulative score, the end marker
/// before characters and characters in order on ties.
pub fn greedy_decode(ids: &BTreeSet<String>, score: impl Fn(&str, TrieSymbol) -> f64) -> String {
    let mut prefix = String::new();
    let mut total = 0.0f64;
    loop {
        let mut options: Vec<TrieSymbol> = Vec::new();
        if ids.contains(&prefix) {
            options.push(TrieSymbol::End);
        }
        let next: BTreeSet<char> = ids
            .iter()
            .filter(|id| id.starts_with(&prefix) && id.len() > prefix.len())
            .map(|id| id[prefix.len()..].chars().next().unwrap())
            .collect();
        options.extend(next.into_iter().map(TrieSymbol::Char));
        let mut best: Option<(f64, TrieSymbol)> = None;
        for sym in options {
            let s = total + score(&prefix, sym);
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, sym));
            }
        }
        let (s, sym) = best.expect("every prefix on a path has a continuation");
        total = s;
        match sym {
            TrieSymbol::End => return prefix,
            TrieSymbol::Char(c) => prefix.push(c),
        }
    }
}

/// A random ASCII/Unicode text with punctuation, contractions and varied
/// whitespace.
pub fn random_text<R: Rng>(rng: &mut R, words: usize) -> String {
    let pieces = [
        "Japan",
        "won",
        ".",
        ",",
        "don't",
        "Zürich",
        "(SOCCER)",
        "\"quoted\"",
        "it's",
        "New",
        "York",
        "—",
        "¿qué?",
        "3.5%",
        "O'Neil",
        "...",
        "naïve",
        "東京",
        "e-mail",
        "we'll",
        "!",
    ];
    let seps = [" ", "  ", "\t", "\n", " \u{00A0}"];
    let mut s = String::new();
    for i in 0..words {
        if i > 0 {
            s.push_str(seps[rng.gen_range(0..seps.len())]);
        }
        s.push_str(pieces[rng.gen_range(0..pieces.len())]);
    }
    s
}

/// Filler words that never appear in a fixture dictionary.
const FILLER: [&str; 10] = ["won", "against", "the", "match", "on", "Friday", "beat", "drew", "with", "after"];

/// `(mention tokens, entity)` pairs with exactly one dictionary candidate.
const UNAMBIGUOUS: [(&[&str], &str); 6] = [
    (&["Japan"], "JAPAN_NT"),
    (&["Syria"], "SYRIA_NT"),
    (&["New", "York"], "NEW_YORK_CITY"),
    (&["Manchester", "United"], "MANCHESTER_UNITED"),
    (&["Berlin"], "BERLIN"),
    (&["Asian", "Cup"], "AFC_ASIAN_CUP"),
];

/// Dictionary TSV and CoNLL corpus where the gold annotations are exactly
/// the dictionary hits, each with a single candidate.
pub fn perfection_fixture<R: Rng>(rng: &mut R, docs: usize) -> (String, String) {
    let mut dict = String::from("# mention\tentity\tprior\n");
    for (toks, ent) in UNAMBIGUOUS {
        dict.push_str(&format!("{}\t{ent}\t1.0\n", toks.join(" ")));
    }
    let mut conll = String::new();
    for d in 0..docs {
        conll.push_str(&format!("-DOCSTART- (perfect{d})\n"));
        for _ in 0..rng.gen_range(1..6) {
            for _ in 0..rng.gen_range(2..12) {
                if rng.gen_bool(0.3) {
                    let (toks, ent) = UNAMBIGUOUS[rng.gen_range(0..UNAMBIGUOUS.len())];
                    for (k, t) in toks.iter().enumerate() {
                        conll.push_str(&format!("{t} {} {ent}\n", if k == 0 { "B" } else { "I" }));
                    }
                    // keeps adjacent mentions apart; punctuation attaches to the mention in raw text
                    let after = if rng.gen_bool(0.3) {
                        [",", "'s"][rng.gen_range(0..2)]
                    } else {
                        FILLER[rng.gen_range(0..FILLER.len())]
                    };
                    conll.push_str(&format!("{after}\n"));
                } else {
                    conll.push_str(&format!("{}\n", FILLER[rng.gen_range(0..FILLER.len())]));
                }
            }
            conll.push_str(".\n\n");
        }
    }
    (dict, conll)
}

/// Ambiguous single-token mentions; the dictionary priors pick the gold
/// entity, a uniform vocabulary cannot.
/// `(surface, gold entity, dictionary candidates)`
type AmbiguousMention = (&'static str, &'static str, &'static [(&'static str, f64)]);

const AMBIGUOUS: [AmbiguousMention; 4] = [
    ("Japan", "JAPAN_NT", &[("JAPAN_NT", 0.7), ("JAPAN", 0.3)]),
    ("Syria", "SYRIA_NT", &[("SYRIA_NT", 0.6), ("SYRIA", 0.4)]),
    ("Paris", "PARIS", &[("PARIS", 0.9), ("PARIS_HILTON", 0.1)]),
    ("Berlin", "BERLIN", &[("BERLIN", 0.8), ("BERLIN_NH", 0.2)]),
];

/// `(dictionary TSV, full vocabulary file, CoNLL corpus)`.
pub fn ambiguous_fixture<R: Rng>(rng: &mut R, docs: usize) -> (String, String, String) {
    let mut dict = String::new();
    let mut vocab: BTreeSet<String> = ["--NME--", "ABERDEEN_FC", "ACCRA"].iter().map(|s| s.to_string()).collect();
    for (surface, _, cands) in AMBIGUOUS {
        for (e, p) in cands {
            dict.push_str(&format!("{surface}\t{e}\t{p}\n"));
            vocab.insert(e.to_string());
        }
    }
    let vocab_file: String = vocab.iter().map(|v| format!("{v}\n")).collect();
    let mut conll = String::new();
    for d in 0..docs {
        conll.push_str(&format!("-DOCSTART- (amb{d})\n"));
        for _ in 0..rng.gen_range(1..4) {
            for _ in 0..rng.gen_range(2..10) {
                if rng.gen_bool(0.35) {
                    let (surface, gold, _) = AMBIGUOUS[rng.gen_range(0..AMBIGUOUS.len())];
                    conll.push_str(&format!("{surface} B {gold}\n"));
                }
                conll.push_str(&format!("{}\n", FILLER[rng.gen_range(0..FILLER.len())]));
            }
            conll.push_str(".\n\n");
        }
    }
    (dict, vocab_file, conll)
}
