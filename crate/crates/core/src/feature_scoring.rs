//! Per-candidate feature scores.
//!
//! | feature               | value                                                     |
//! |-----------------------|-----------------------------------------------------------|
//! | `edit_distance`       | `1 - dist / (delta + 1)`                                  |
//! | `string_similarity`   | weighted sum of NLCS, prefix, substring, suffix variants  |
//! | `language_popularity` | `freq1(c) / max freq1` over the candidate set             |
//! | `lexicon:<name>`      | 1 if the candidate is in that lexicon, else 0             |
//! | `exact_context`       | summed n-gram counts of substituted contexts, max-normed  |
//! | `relaxed_context`     | same with one context word wildcarded per lookup          |
//!
//! Self-normalized features are 0 for every candidate when all numerators
//! are 0.

use serde::{Deserialize, Serialize};

use crate::candidate_search::{self, levenshtein, CandidateSet, Lexicon, SearchOptions};
use crate::detector::DetectedError;
use crate::error::{Error, Result};
use crate::ngram_index::NgramIndex;

pub fn edit_distance_score(candidate: &str, error: &str, delta: usize) -> f64 {
    1.0 - levenshtein(candidate, error) as f64 / (delta as f64 + 1.0)
}

/// Length of the longest common subsequence, in characters.
pub fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest common consecutive run starting at the first character of both.
pub fn common_prefix_len(a: &[char], b: &[char]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Longest common consecutive run ending at the last character of both.
pub fn common_suffix_len(a: &[char], b: &[char]) -> usize {
    a.iter().rev().zip(b.iter().rev()).take_while(|(x, y)| x == y).count()
}

/// Longest common substring starting anywhere.
pub fn longest_common_substring_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            cur[j + 1] = if ca == cb { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityNormalization {
    /// `2 * len(sub)^2 / (len(a) + len(b))`; not bounded by 1.
    #[default]
    SumOfLengths,
    /// `len(sub)^2 / (len(a) * len(b))`; bounded by 1.
    ProductOfLengths,
}

impl SimilarityNormalization {
    fn apply(self, sub: usize, a: usize, b: usize) -> f64 {
        let sub = sub as f64;
        match self {
            SimilarityNormalization::SumOfLengths => 2.0 * sub * sub / (a + b) as f64,
            SimilarityNormalization::ProductOfLengths => sub * sub / (a * b) as f64,
        }
    }
}

/// The four normalized components: LCS, prefix run, any-position run, suffix run.
pub fn similarity_components(
    candidate: &str,
    error: &str,
    normalization: SimilarityNormalization,
) -> Result<[f64; 4]> {
    if candidate.is_empty() || error.is_empty() {
        return Err(Error::Scoring(format!(
            "string similarity needs non-empty strings, got {candidate:?} and {error:?}"
        )));
    }
    let a: Vec<char> = candidate.chars().collect();
    let b: Vec<char> = error.chars().collect();
    let norm = |len| normalization.apply(len, a.len(), b.len());
    Ok([
        norm(lcs_len(&a, &b)),
        norm(common_prefix_len(&a, &b)),
        norm(longest_common_substring_len(&a, &b)),
        norm(common_suffix_len(&a, &b)),
    ])
}

pub fn string_similarity_score(
    candidate: &str,
    error: &str,
    alphas: [f64; 4],
    normalization: SimilarityNormalization,
) -> Result<f64> {
    let parts = similarity_components(candidate, error, normalization)?;
    Ok(parts.iter().zip(alphas).map(|(p, a)| p * a).sum())
}

/// Divide each numerator by the largest; all zeros stay zero.
fn normalize_by_max(numerators: &[u128]) -> Vec<f64> {
    let max = numerators.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return vec![0.0; numerators.len()];
    }
    numerators.iter().map(|&n| n as f64 / max as f64).collect()
}

fn self_normalized<F>(candidate: &str, candidates: &CandidateSet, numerator: F) -> Result<f64>
where
    F: Fn(&str) -> Result<u128>,
{
    let own = numerator(candidate)?;
    let mut max = own;
    for term in candidates.terms() {
        max = max.max(numerator(term)?);
    }
    Ok(normalize_by_max(&[own, max])[0])
}

pub fn language_popularity(candidate: &str, candidates: &CandidateSet, unigrams: &NgramIndex) -> Result<f64> {
    self_normalized(candidate, candidates, |w| Ok(unigrams.freq(&[w])? as u128))
}

pub fn lexicon_existence(candidate: &str, lexicon: &Lexicon) -> f64 {
    if lexicon.contains(candidate) {
        1.0
    } else {
        0.0
    }
}

/// Summed frequency of the error's contexts with the candidate substituted.
pub fn exact_context_numerator(candidate: &str, error: &DetectedError, index: &NgramIndex) -> Result<u128> {
    error.contexts.iter().try_fold(0u128, |acc, window| {
        Ok(acc + index.freq(&window.substituted(candidate))? as u128)
    })
}

/// Like [`exact_context_numerator`], but each substituted context contributes
/// the sum of its one-wildcard variants over every non-candidate position.
pub fn relaxed_context_numerator(candidate: &str, error: &DetectedError, index: &NgramIndex) -> Result<u128> {
    let mut total = 0u128;
    for window in &error.contexts {
        let gram = window.substituted(candidate);
        for p in (0..gram.len()).filter(|&p| p != window.focus) {
            total += index.relaxed_freq(&gram, p)? as u128;
        }
    }
    Ok(total)
}

pub fn exact_context_score(
    candidate: &str,
    error: &DetectedError,
    candidates: &CandidateSet,
    index: &NgramIndex,
) -> Result<f64> {
    self_normalized(candidate, candidates, |w| exact_context_numerator(w, error, index))
}

pub fn relaxed_context_score(
    candidate: &str,
    error: &DetectedError,
    candidates: &CandidateSet,
    index: &NgramIndex,
) -> Result<f64> {
    self_normalized(candidate, candidates, |w| relaxed_context_numerator(w, error, index))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureToggles {
    pub edit_distance: bool,
    pub string_similarity: bool,
    pub language_popularity: bool,
    pub lexicon_existence: bool,
    pub exact_context: bool,
    pub relaxed_context: bool,
}

impl Default for FeatureToggles {
    fn default() -> Self {
        FeatureToggles {
            edit_distance: true,
            string_similarity: true,
            language_popularity: true,
            lexicon_existence: true,
            exact_context: true,
            relaxed_context: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feature {
    EditDistance,
    StringSimilarity,
    LanguagePopularity,
    /// Index into [`ScoringResources::feature_lexicons`].
    LexiconExistence(usize),
    ExactContext,
    RelaxedContext,
}

pub const LANGUAGE_POPULARITY: &str = "language_popularity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringSettings {
    pub delta: usize,
    pub alphas: [f64; 4],
    pub similarity_normalization: SimilarityNormalization,
    pub search: SearchOptions,
    pub features: FeatureToggles,
}

impl Default for ScoringSettings {
    fn default() -> Self {
        ScoringSettings {
            delta: 3,
            alphas: [0.25; 4],
            similarity_normalization: SimilarityNormalization::default(),
            search: SearchOptions::default(),
            features: FeatureToggles::default(),
        }
    }
}

/// Everything needed to generate and score candidates.
#[derive(Debug, Clone)]
pub struct ScoringResources {
    pub unigrams: NgramIndex,
    pub contexts: NgramIndex,
    /// Main search lexicon.
    pub lexicon: Lexicon,
    /// Extra lexicons: each contributes candidates and one existence feature.
    pub feature_lexicons: Vec<Lexicon>,
    pub settings: ScoringSettings,
}

impl ScoringResources {
    /// Feature order of the vectors produced by [`score_all`].
    pub fn layout(&self) -> Vec<Feature> {
        let t = &self.settings.features;
        let mut out = Vec::new();
        if t.edit_distance {
            out.push(Feature::EditDistance);
        }
        if t.string_similarity {
            out.push(Feature::StringSimilarity);
        }
        if t.language_popularity {
            out.push(Feature::LanguagePopularity);
        }
        if t.lexicon_existence {
            out.extend((0..self.feature_lexicons.len()).map(Feature::LexiconExistence));
        }
        if t.exact_context {
            out.push(Feature::ExactContext);
        }
        if t.relaxed_context {
            out.push(Feature::RelaxedContext);
        }
        out
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.layout()
            .into_iter()
            .map(|f| match f {
                Feature::EditDistance => "edit_distance".to_string(),
                Feature::StringSimilarity => "string_similarity".to_string(),
                Feature::LanguagePopularity => LANGUAGE_POPULARITY.to_string(),
                Feature::LexiconExistence(i) => format!("lexicon:{}", self.feature_lexicons[i].name()),
                Feature::ExactContext => "exact_context".to_string(),
                Feature::RelaxedContext => "relaxed_context".to_string(),
            })
            .collect()
    }

    /// Union of the bounded search over the main and every feature lexicon.
    pub fn candidates(&self, error_surface: &str) -> Result<CandidateSet> {
        let s = &self.settings;
        let mut set = candidate_search::search(error_surface, &self.lexicon, s.delta, s.search)?;
        for lex in self.feature_lexicons.iter().filter(|l| !l.is_empty()) {
            set.merge(candidate_search::search(error_surface, lex, s.delta, s.search)?);
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub surface: String,
    pub features: Vec<f64>,
}

/// Score every candidate of one error. Output follows the candidate set's
/// order; each vector follows [`ScoringResources::layout`].
pub fn score_all(
    error: &DetectedError,
    candidates: &CandidateSet,
    resources: &ScoringResources,
) -> Result<Vec<ScoredCandidate>> {
    let terms: Vec<&str> = candidates.terms().collect();
    let settings = &resources.settings;
    let layout = resources.layout();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(layout.len());

    for feature in &layout {
        let column = match *feature {
            Feature::EditDistance => terms
                .iter()
                .map(|t| edit_distance_score(t, error.surface(), settings.delta))
                .collect(),
            Feature::StringSimilarity => terms
                .iter()
                .map(|t| {
                    string_similarity_score(
                        t,
                        error.surface(),
                        settings.alphas,
                        settings.similarity_normalization,
                    )
                })
                .collect::<Result<_>>()?,
            Feature::LanguagePopularity => {
                let nums = terms
                    .iter()
                    .map(|t| Ok(resources.unigrams.freq(&[*t])? as u128))
                    .collect::<Result<Vec<_>>>()?;
                normalize_by_max(&nums)
            }
            Feature::LexiconExistence(i) => terms
                .iter()
                .map(|t| lexicon_existence(t, &resources.feature_lexicons[i]))
                .collect(),
            Feature::ExactContext => {
                let nums = terms
                    .iter()
                    .map(|t| exact_context_numerator(t, error, &resources.contexts))
                    .collect::<Result<Vec<_>>>()?;
                normalize_by_max(&nums)
            }
            Feature::RelaxedContext => {
                let nums = terms
                    .iter()
                    .map(|t| relaxed_context_numerator(t, error, &resources.contexts))
                    .collect::<Result<Vec<_>>>()?;
                normalize_by_max(&nums)
            }
        };
        columns.push(column);
    }

    Ok(terms
        .iter()
        .enumerate()
        .map(|(i, t)| ScoredCandidate {
            surface: t.to_string(),
            features: columns.iter().map(|c| c[i]).collect(),
        })
        .collect())
}
