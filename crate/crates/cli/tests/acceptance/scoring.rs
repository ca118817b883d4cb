//! Feature scorers against independently computed values.

use std::collections::HashMap;

use ocrpost_core::candidate_search::Lexicon;
use ocrpost_core::detector::DetectedError;
use ocrpost_core::feature_scoring::{
    edit_distance_score, score_all, ScoringResources, ScoringSettings, SimilarityNormalization,
};
use ocrpost_core::ngram_index::NgramIndex;
use ocrpost_core::text_pipeline::{tokenize, TokenizerRules};

const TEXT: &str = "the birds in whicli the males are";
const ERROR_POS: usize = 3;
const DELTA: usize = 3;
const ALPHAS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

const UNIGRAMS: &[(&str, u64)] = &[
    ("which", 1000),
    ("white", 400),
    ("whilst", 50),
    ("the", 5000),
    ("birds", 80),
    ("in", 3000),
    ("males", 20),
];

const TRIGRAMS: &[(&str, u64)] = &[
    ("birds in which", 30),
    ("in which the", 45),
    ("which the males", 12),
    ("birds in white", 5),
    ("white the males", 2),
    ("birds of which", 7),
    ("on which the", 4),
    ("in whilst a", 3),
    ("in white a", 9),
    ("which the females", 6),
];

fn resources(scale: u64) -> ScoringResources {
    let unigrams = NgramIndex::from_records(1, UNIGRAMS.iter().map(|&(w, c)| (vec![w], c * scale))).unwrap();
    let contexts =
        NgramIndex::from_records(3, TRIGRAMS.iter().map(|&(g, c)| (g.split(' ').collect::<Vec<_>>(), c * scale)))
            .unwrap();
    ScoringResources {
        unigrams,
        contexts,
        lexicon: Lexicon::from_terms("english", ["which", "white", "whilst", "the", "birds"]),
        feature_lexicons: vec![Lexicon::from_terms("archaic", ["whilst"])],
        settings: ScoringSettings {
            delta: DELTA,
            alphas: ALPHAS,
            similarity_normalization: SimilarityNormalization::SumOfLengths,
            ..Default::default()
        },
    }
}

fn naive_lev(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let sub = naive_lev(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
    sub.min(naive_lev(&a[1..], b) + 1).min(naive_lev(a, &b[1..]) + 1)
}

fn naive_lcs(a: &[char], b: &[char]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    if a[0] == b[0] {
        return 1 + naive_lcs(&a[1..], &b[1..]);
    }
    naive_lcs(&a[1..], b).max(naive_lcs(a, &b[1..]))
}

/// Longest common substring by enumerating every substring of `a`.
fn naive_substring(a: &[char], b: &[char]) -> usize {
    let mut best = 0;
    for i in 0..a.len() {
        for j in i + 1..=a.len() {
            if b.windows(j - i).any(|w| w == &a[i..j]) {
                best = best.max(j - i);
            }
        }
    }
    best
}

fn similarity(c: &str, e: &str) -> f64 {
    let a: Vec<char> = c.chars().collect();
    let b: Vec<char> = e.chars().collect();
    let prefix = (0..=a.len().min(b.len())).rev().find(|&k| a[..k] == b[..k]).unwrap();
    let suffix = (0..=a.len().min(b.len()))
        .rev()
        .find(|&k| a[a.len() - k..] == b[b.len() - k..])
        .unwrap();
    let norm = |l: usize| 2.0 * (l * l) as f64 / (a.len() + b.len()) as f64;
    let parts = [
        norm(naive_lcs(&a, &b)),
        norm(prefix),
        norm(naive_substring(&a, &b)),
        norm(suffix),
    ];
    parts.iter().zip(ALPHAS).map(|(p, w)| p * w).sum()
}

fn trigram_table() -> HashMap<Vec<&'static str>, u64> {
    TRIGRAMS.iter().map(|&(g, c)| (g.split(' ').collect(), c)).collect()
}

/// Windows of three tokens around the error with the candidate substituted.
fn windows(candidate: &'static str) -> Vec<Vec<&'static str>> {
    let mut tokens: Vec<&'static str> = TEXT.split(' ').collect();
    tokens[ERROR_POS] = candidate;
    (ERROR_POS - 2..=ERROR_POS).map(|s| tokens[s..s + 3].to_vec()).collect()
}

fn exact_numerator(c: &'static str) -> u64 {
    let table = trigram_table();
    windows(c).iter().map(|w| table.get(w).copied().unwrap_or(0)).sum()
}

fn relaxed_numerator(c: &'static str) -> u64 {
    let table = trigram_table();
    let mut total = 0;
    for (k, w) in windows(c).iter().enumerate() {
        let focus = 2 - k;
        for p in (0..3).filter(|&p| p != focus) {
            total += table
                .iter()
                .filter(|(g, _)| (0..3).all(|i| i == p || g[i] == w[i]))
                .map(|(_, n)| n)
                .sum::<u64>();
        }
    }
    total
}

fn max_norm(values: &[u64]) -> Vec<f64> {
    let max = *values.iter().max().unwrap();
    values
        .iter()
        .map(|&v| if max == 0 { 0.0 } else { v as f64 / max as f64 })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    a == b || ((a - b).abs() / a.abs().max(b.abs())) <= 1e-12
}

pub fn scorer_formulas() -> Result<String, String> {
    let err = |e: ocrpost_core::Error| e.to_string();
    let r = resources(1);
    let tokens = tokenize(TEXT, &TokenizerRules::default());
    let error = DetectedError::at(&tokens, ERROR_POS, &r.contexts, &r.unigrams).map_err(err)?;
    let set = r.candidates(error.surface()).map_err(err)?;
    let scored = score_all(&error, &set, &r).map_err(err)?;

    let names = r.feature_names();
    let expected_names = [
        "edit_distance",
        "string_similarity",
        "language_popularity",
        "lexicon:archaic",
        "exact_context",
        "relaxed_context",
    ];
    if names != expected_names {
        return Err(format!("unexpected feature layout {names:?}"));
    }
    let cands: Vec<&'static str> = vec!["which", "whilst", "white"];
    let got: Vec<&str> = scored.iter().map(|s| s.surface.as_str()).collect();
    if got != cands {
        return Err(format!("candidate set {got:?}, expected {cands:?}"));
    }

    // Hand-derived numerators for "which".
    if exact_numerator("which") != 30 + 45 + 12 {
        return Err("exact-context oracle disagrees with hand count".into());
    }
    // Window 1 wildcards "birds"/"in", window 2 "in"/"the", window 3 "the"/"males".
    if relaxed_numerator("which") != (30 + 37) + (49 + 45) + (18 + 12) {
        return Err("relaxed-context oracle disagrees with hand count".into());
    }

    let uni: HashMap<&str, u64> = UNIGRAMS.iter().copied().collect();
    let pop = max_norm(&cands.iter().map(|c| uni[c]).collect::<Vec<_>>());
    let exact = max_norm(&cands.iter().map(|c| exact_numerator(c)).collect::<Vec<_>>());
    let relaxed = max_norm(&cands.iter().map(|c| relaxed_numerator(c)).collect::<Vec<_>>());
    let e: Vec<char> = "whicli".chars().collect();

    let mut checked = 0;
    for (i, (c, s)) in cands.iter().zip(&scored).enumerate() {
        let cc: Vec<char> = c.chars().collect();
        let want = [
            1.0 - naive_lev(&cc, &e) as f64 / (DELTA + 1) as f64,
            similarity(c, "whicli"),
            pop[i],
            f64::from(u8::from(*c == "whilst")),
            exact[i],
            relaxed[i],
        ];
        for (f, (&w, &g)) in want.iter().zip(&s.features).enumerate() {
            if !close(w, g) {
                return Err(format!("{c}: {} = {g}, oracle {w}", names[f]));
            }
            checked += 1;
        }
    }

    // Count scaling leaves the ratio features unchanged.
    let r1000 = resources(1000);
    let error1000 = DetectedError::at(&tokens, ERROR_POS, &r1000.contexts, &r1000.unigrams).map_err(err)?;
    let scored1000 = score_all(&error1000, &r1000.candidates("whicli").map_err(err)?, &r1000).map_err(err)?;
    for (a, b) in scored.iter().zip(&scored1000) {
        for f in [2, 4, 5] {
            if a.features[f].to_bits() != b.features[f].to_bits() {
                return Err(format!("{} changes under x1000 scaling for {}", names[f], a.surface));
            }
        }
    }

    let ed = edit_distance_score("cat", "cot", 3);
    if ed != 0.75 {
        return Err(format!("edit_distance_score(dist 1, delta 3) = {ed}"));
    }
    Ok(format!(
        "{checked} feature values within 1e-12; x1000 scale invariance exact; dist 1 at delta 3 scores 0.75"
    ))
}
