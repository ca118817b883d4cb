//! Frequency-based error detection.
//!
//! A word passes only if both hold:
//! - its unigram frequency is strictly above a length-dependent threshold;
//! - at least one of its sliding-window n-gram contexts reaches the context
//!   threshold.
//!
//! Everything else that is an unfiltered word is reported.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram_index::{Count, NgramIndex};
use crate::text_pipeline::Token;

/// One n-gram window around a token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextWindow {
    /// Index of the first window token in the token stream.
    pub start: usize,
    pub tokens: Vec<String>,
    /// Offset of the focus token inside `tokens`.
    pub focus: usize,
}

impl ContextWindow {
    /// The window with the focus token replaced by `word`.
    pub fn substituted<'a>(&'a self, word: &'a str) -> Vec<&'a str> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, t)| if i == self.focus { word } else { t.as_str() })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedError {
    pub token: Token,
    /// Position of the token in the stream it was detected in.
    pub position: usize,
    pub contexts: Vec<ContextWindow>,
    pub unigram_freq: Count,
    pub best_context_freq: Count,
}

impl DetectedError {
    /// Build an error record for an arbitrary token, e.g. a ground-truth
    /// error position that the detector did not flag.
    pub fn at(
        tokens: &[Token],
        position: usize,
        index: &NgramIndex,
        unigrams: &NgramIndex,
    ) -> Result<Self> {
        let token = tokens
            .get(position)
            .ok_or_else(|| Error::Usage(format!("token position {position} out of range")))?
            .clone();
        let contexts = collect_contexts(tokens, position, index.order())?;
        let best_context_freq = best_context(&contexts, index)?;
        let unigram_freq = unigrams.freq(&[token.surface.as_str()])?;
        Ok(DetectedError {
            token,
            position,
            contexts,
            unigram_freq,
            best_context_freq,
        })
    }

    pub fn surface(&self) -> &str {
        &self.token.surface
    }
}

fn best_context(contexts: &[ContextWindow], index: &NgramIndex) -> Result<Count> {
    contexts.iter().try_fold(0, |best, w| Ok(best.max(index.freq(&w.tokens)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectionThresholds {
    /// Minimum unigram count by word length in characters. A length maps to
    /// the entry with the greatest key not above it; lengths below the first
    /// key use the first entry.
    pub unigram_threshold_by_length: BTreeMap<usize, Count>,
    pub context_threshold: Count,
    pub window_order: usize,
}

impl Default for DetectionThresholds {
    fn default() -> Self {
        DetectionThresholds {
            unigram_threshold_by_length: [
                (1, 1_000_000),
                (2, 100_000),
                (3, 10_000),
                (4, 1_000),
                (7, 200),
            ]
            .into_iter()
            .collect(),
            context_threshold: 1,
            window_order: 5,
        }
    }
}

impl DetectionThresholds {
    pub fn unigram_threshold(&self, word_len: usize) -> Count {
        self.unigram_threshold_by_length
            .range(..=word_len)
            .next_back()
            .or_else(|| self.unigram_threshold_by_length.iter().next())
            .map_or(0, |(_, &t)| t)
    }

    pub fn passes_unigram(&self, word: &str, freq: Count) -> bool {
        freq > self.unigram_threshold(word.chars().count())
    }

    pub fn passes_context(&self, best_context_freq: Count) -> bool {
        best_context_freq >= self.context_threshold
    }
}

/// Every contiguous `n`-token window containing `position`, clipped at the
/// stream boundaries. Streams shorter than `n` have no windows.
pub fn collect_contexts(tokens: &[Token], position: usize, n: usize) -> Result<Vec<ContextWindow>> {
    if n < 1 {
        return Err(Error::Usage("window order must be at least 1".into()));
    }
    if position >= tokens.len() {
        return Err(Error::Usage(format!(
            "position {position} out of range for {} tokens",
            tokens.len()
        )));
    }
    if tokens.len() < n {
        return Ok(Vec::new());
    }
    let first = position.saturating_sub(n - 1);
    let last = position.min(tokens.len() - n);
    Ok((first..=last)
        .map(|start| ContextWindow {
            start,
            tokens: tokens[start..start + n]
                .iter()
                .map(|t| t.surface.clone())
                .collect(),
            focus: position - start,
        })
        .collect())
}

/// Flag suspected errors among unfiltered word tokens, in token order.
pub fn detect(
    tokens: &[Token],
    index: &NgramIndex,
    unigrams: &NgramIndex,
    thresholds: &DetectionThresholds,
) -> Result<Vec<DetectedError>> {
    if index.order() != thresholds.window_order {
        return Err(Error::Usage(format!(
            "context index has order {} but window order is {}",
            index.order(),
            thresholds.window_order
        )));
    }
    if unigrams.order() != 1 {
        return Err(Error::Usage("unigram index must have order 1".into()));
    }

    let mut errors = Vec::new();
    for (position, token) in tokens.iter().enumerate() {
        if token.filtered || !token.is_word() {
            continue;
        }
        let unigram_freq = unigrams.freq(&[token.surface.as_str()])?;
        let contexts = collect_contexts(tokens, position, thresholds.window_order)?;
        let best_context_freq = best_context(&contexts, index)?;
        if thresholds.passes_unigram(&token.surface, unigram_freq)
            && thresholds.passes_context(best_context_freq)
        {
            continue;
        }
        errors.push(DetectedError {
            token: token.clone(),
            position,
            contexts,
            unigram_freq,
            best_context_freq,
        });
    }
    Ok(errors)
}
