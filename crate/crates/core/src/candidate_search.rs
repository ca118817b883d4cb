//! Lexicon search for correction candidates within a Levenshtein bound.
//!
//! Distances count insertions, deletions and substitutions of Unicode scalar
//! values; transpositions cost two edits. The accelerated search walks a
//! character trie carrying one DP row per depth and prunes any subtree whose
//! row minimum already exceeds the bound. [`brute_force_search`] computes the
//! same set by scanning every term.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram_index::{Count, NgramIndex};

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

pub(crate) fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    children: Vec<(char, u32)>,
    /// Lexicon term ids ending here. The case-folded trie can map several
    /// terms to one node.
    terms: Vec<u32>,
}

#[derive(Debug, Clone)]
struct Trie {
    nodes: Vec<TrieNode>,
}

impl Trie {
    fn build<'a>(keys: impl Iterator<Item = (u32, &'a str)>) -> Trie {
        let mut nodes = vec![TrieNode::default()];
        for (id, key) in keys {
            let mut at = 0usize;
            for c in key.chars() {
                at = match nodes[at].children.binary_search_by_key(&c, |&(k, _)| k) {
                    Ok(i) => nodes[at].children[i].1 as usize,
                    Err(i) => {
                        let next = nodes.len() as u32;
                        nodes.push(TrieNode::default());
                        nodes[at].children.insert(i, (c, next));
                        next as usize
                    }
                };
            }
            nodes[at].terms.push(id);
        }
        Trie { nodes }
    }

    /// Visit every stored term within `delta` of `query`.
    fn search(&self, query: &[char], delta: usize, mut emit: impl FnMut(u32, usize)) {
        let width = query.len() + 1;
        let root_row: Vec<usize> = (0..width).collect();
        if root_row[query.len()] <= delta {
            for &t in &self.nodes[0].terms {
                emit(t, root_row[query.len()]);
            }
        }
        // rows[d] is the DP row for the node at depth d on the current path.
        let mut rows: Vec<Vec<usize>> = vec![root_row];
        let mut stack: Vec<(char, u32, usize)> = self.nodes[0]
            .children
            .iter()
            .rev()
            .map(|&(c, n)| (c, n, 1))
            .collect();

        while let Some((c, node, depth)) = stack.pop() {
            rows.truncate(depth);

            let prev = &rows[depth - 1];
            let mut row = Vec::with_capacity(width);
            row.push(prev[0] + 1);
            let mut row_min = row[0];
            for j in 1..width {
                let v = (prev[j] + 1)
                    .min(row[j - 1] + 1)
                    .min(prev[j - 1] + usize::from(query[j - 1] != c));
                row_min = row_min.min(v);
                row.push(v);
            }

            let dist = row[width - 1];
            let n = &self.nodes[node as usize];
            if dist <= delta {
                for &t in &n.terms {
                    emit(t, dist);
                }
            }
            if row_min <= delta {
                rows.push(row);
                stack.extend(n.children.iter().rev().map(|&(c, child)| (c, child, depth + 1)));
            }
        }
    }
}

/// A searchable term list, optionally carrying per-term frequencies.
#[derive(Debug)]
pub struct Lexicon {
    name: String,
    terms: Vec<String>,
    freqs: HashMap<String, Count>,
    trie: Trie,
    folded: OnceLock<(Trie, Vec<String>)>,
}

impl Clone for Lexicon {
    fn clone(&self) -> Self {
        Lexicon {
            name: self.name.clone(),
            terms: self.terms.clone(),
            freqs: self.freqs.clone(),
            trie: self.trie.clone(),
            folded: OnceLock::new(),
        }
    }
}

impl Lexicon {
    pub fn from_terms<I, S>(name: impl Into<String>, terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_freqs(name, terms.into_iter().map(|t| (t.into(), None)))
    }

    fn with_freqs(name: impl Into<String>, entries: impl Iterator<Item = (String, Option<Count>)>) -> Self {
        let mut freqs: HashMap<String, Count> = HashMap::new();
        let mut terms: Vec<String> = Vec::new();
        for (term, freq) in entries {
            if let Some(f) = freq {
                *freqs.entry(term.clone()).or_default() += f;
            }
            terms.push(term);
        }
        terms.sort_unstable();
        terms.dedup();
        let trie = Trie::build(terms.iter().enumerate().map(|(i, t)| (i as u32, t.as_str())));
        Lexicon {
            name: name.into(),
            terms,
            freqs,
            trie,
            folded: OnceLock::new(),
        }
    }

    /// Load a lexicon file: one term per line, optionally followed by a TAB
    /// and a decimal frequency of at least 1.
    pub fn from_file(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                file: path.to_path_buf(),
                line: i + 1,
                message,
            };
            match line.split_once('\t') {
                None => entries.push((line.to_string(), None)),
                Some((term, freq)) => {
                    let f: Count = freq
                        .parse()
                        .map_err(|_| parse_err(format!("invalid frequency {freq:?}")))?;
                    if f == 0 {
                        return Err(parse_err("lexicon frequencies must be at least 1".into()));
                    }
                    if term.is_empty() {
                        return Err(parse_err("empty term".into()));
                    }
                    entries.push((term.to_string(), Some(f)));
                }
            }
        }
        Ok(Self::with_freqs(name, entries.into_iter()))
    }

    /// Every unigram with count at least `min_freq` becomes a term.
    pub fn from_unigrams(name: impl Into<String>, unigrams: &NgramIndex, min_freq: Count) -> Result<Self> {
        let terms = unigrams.unigram_terms()?;
        Ok(Self::with_freqs(
            name,
            terms
                .into_iter()
                .filter(|&(_, c)| c >= min_freq.max(1))
                .map(|(t, c)| (t.to_string(), Some(c))),
        ))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).is_ok()
    }

    pub fn frequency(&self, term: &str) -> Option<Count> {
        self.freqs.get(term).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    fn folded(&self) -> &(Trie, Vec<String>) {
        self.folded.get_or_init(|| {
            let lowered: Vec<String> = self.terms.iter().map(|t| t.to_lowercase()).collect();
            let trie = Trie::build(lowered.iter().enumerate().map(|(i, t)| (i as u32, t.as_str())));
            (trie, lowered)
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Compare lowercased forms; results keep the lexicon's spelling.
    pub case_fold: bool,
    /// Scan every term instead of walking the trie.
    pub brute_force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CandidateEntry {
    pub distance: usize,
    pub term: String,
}

/// Lexicon terms within `delta` edits of an error, sorted by (distance, term).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub error_surface: String,
    pub delta: usize,
    pub candidates: Vec<CandidateEntry>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|c| c.term.as_str())
    }

    pub fn contains(&self, term: &str) -> bool {
        self.candidates.iter().any(|c| c.term == term)
    }

    /// Merge another set for the same error, keeping each term once.
    pub fn merge(&mut self, other: CandidateSet) {
        self.candidates.extend(other.candidates);
        self.candidates.sort_unstable();
        self.candidates.dedup_by(|a, b| a.term == b.term);
    }
}

pub fn search(
    error_surface: &str,
    lexicon: &Lexicon,
    delta: usize,
    options: SearchOptions,
) -> Result<CandidateSet> {
    if lexicon.is_empty() {
        return Err(Error::Config(format!(
            "lexicon {:?} is empty; nothing to search",
            lexicon.name
        )));
    }
    if options.brute_force {
        return Ok(brute_force_search(error_surface, lexicon, delta, options.case_fold));
    }

    let mut candidates = Vec::new();
    if options.case_fold {
        let query: Vec<char> = error_surface.to_lowercase().chars().collect();
        let (trie, _) = lexicon.folded();
        trie.search(&query, delta, |id, distance| {
            candidates.push(CandidateEntry {
                distance,
                term: lexicon.terms[id as usize].clone(),
            })
        });
    } else {
        let query: Vec<char> = error_surface.chars().collect();
        lexicon.trie.search(&query, delta, |id, distance| {
            candidates.push(CandidateEntry {
                distance,
                term: lexicon.terms[id as usize].clone(),
            })
        });
    }
    candidates.sort_unstable();
    Ok(CandidateSet {
        error_surface: error_surface.to_string(),
        delta,
        candidates,
    })
}

/// Reference implementation: full DP against every term.
pub fn brute_force_search(error_surface: &str, lexicon: &Lexicon, delta: usize, case_fold: bool) -> CandidateSet {
    let query: Vec<char> = if case_fold {
        error_surface.to_lowercase().chars().collect()
    } else {
        error_surface.chars().collect()
    };
    let mut candidates: Vec<CandidateEntry> = lexicon
        .terms
        .iter()
        .enumerate()
        .filter_map(|(i, term)| {
            let key: Vec<char> = if case_fold {
                lexicon.folded().1[i].chars().collect()
            } else {
                term.chars().collect()
            };
            let distance = levenshtein_chars(&query, &key);
            (distance <= delta).then(|| CandidateEntry {
                distance,
                term: term.clone(),
            })
        })
        .collect();
    candidates.sort_unstable();
    CandidateSet {
        error_surface: error_surface.to_string(),
        delta,
        candidates,
    }
}
