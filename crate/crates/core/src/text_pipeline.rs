//! Tokenization and token filtering for OCR text.
//!
//! The tokenizer applies a small, explicit rule list loosely following Penn
//! Treebank conventions as used by web-scale n-gram corpora:
//!
//! 1. Split on Unicode whitespace.
//! 2. Detach leading and trailing punctuation runs from each chunk, one token
//!    per punctuation character.
//! 3. Keep everything between the first and last alphanumeric character
//!    together, including internal apostrophes and stray OCR symbols such as
//!    `ga/bula`.
//! 4. Split that core at internal hyphens. The children remember the parent
//!    span in [`Token::origin`]; the hyphen bytes themselves are covered only
//!    by the parent span.
//!
//! Filtering marks tokens instead of removing them: context windows for
//! detection and scoring are built over the full token stream, so filtered
//! words (common words included) still serve as context.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open byte range into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Punctuation,
    Numeric,
}

impl TokenKind {
    pub fn classify(surface: &str) -> TokenKind {
        if !surface.is_empty() && surface.chars().all(|c| c.is_ascii_digit()) {
            TokenKind::Numeric
        } else if surface.chars().any(char::is_alphanumeric) {
            TokenKind::Word
        } else {
            TokenKind::Punctuation
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub span: Span,
    pub kind: TokenKind,
    pub filtered: bool,
    /// Span of the hyphenated word this token was split from.
    pub origin: Option<Span>,
}

impl Token {
    fn new(text: &str, span: Span, origin: Option<Span>) -> Self {
        let surface = text[span.start..span.end].to_string();
        Token {
            kind: TokenKind::classify(&surface),
            surface,
            span,
            filtered: false,
            origin,
        }
    }

    pub fn is_word(&self) -> bool {
        self.kind == TokenKind::Word
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TokenizerRules {
    pub detach_edge_punctuation: bool,
    pub split_hyphens: bool,
    pub hyphens: Vec<char>,
}

impl Default for TokenizerRules {
    fn default() -> Self {
        TokenizerRules {
            detach_edge_punctuation: true,
            split_hyphens: true,
            hyphens: vec!['-', '\u{2010}'],
        }
    }
}

/// Tokenize raw bytes, reporting the first invalid UTF-8 offset on failure.
pub fn tokenize_bytes(bytes: &[u8], rules: &TokenizerRules) -> Result<Vec<Token>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.valid_up_to(),
    })?;
    Ok(tokenize(text, rules))
}

pub fn tokenize(text: &str, rules: &TokenizerRules) -> Vec<Token> {
    let mut tokens = Vec::new();
    for chunk in whitespace_chunks(text) {
        tokenize_chunk(text, chunk, rules, &mut tokens);
    }
    tokens
}

fn whitespace_chunks(text: &str) -> Vec<Span> {
    let mut chunks = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                chunks.push(Span::new(s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        chunks.push(Span::new(s, text.len()));
    }
    chunks
}

fn tokenize_chunk(text: &str, chunk: Span, rules: &TokenizerRules, out: &mut Vec<Token>) {
    let body = &text[chunk.start..chunk.end];
    if !rules.detach_edge_punctuation {
        split_core(text, chunk, rules, out);
        return;
    }

    let first = body.char_indices().find(|(_, c)| c.is_alphanumeric());
    let last = body.char_indices().rev().find(|(_, c)| c.is_alphanumeric());
    let (core_start, core_end) = match (first, last) {
        (Some((f, _)), Some((l, c))) => (chunk.start + f, chunk.start + l + c.len_utf8()),
        _ => {
            push_chars(text, chunk, out);
            return;
        }
    };

    push_chars(text, Span::new(chunk.start, core_start), out);
    split_core(text, Span::new(core_start, core_end), rules, out);
    push_chars(text, Span::new(core_end, chunk.end), out);
}

fn push_chars(text: &str, span: Span, out: &mut Vec<Token>) {
    for (i, c) in text[span.start..span.end].char_indices() {
        let start = span.start + i;
        out.push(Token::new(text, Span::new(start, start + c.len_utf8()), None));
    }
}

fn split_core(text: &str, core: Span, rules: &TokenizerRules, out: &mut Vec<Token>) {
    let body = &text[core.start..core.end];
    if !rules.split_hyphens || !body.chars().any(|c| rules.hyphens.contains(&c)) {
        out.push(Token::new(text, core, None));
        return;
    }

    let mut pieces = Vec::new();
    let mut piece_start = core.start;
    for (i, c) in body.char_indices() {
        if rules.hyphens.contains(&c) {
            let at = core.start + i;
            if at > piece_start {
                pieces.push(Span::new(piece_start, at));
            }
            piece_start = at + c.len_utf8();
        }
    }
    if core.end > piece_start {
        pieces.push(Span::new(piece_start, core.end));
    }

    if pieces.len() == 1 && pieces[0] == core {
        out.push(Token::new(text, core, None));
        return;
    }
    out.extend(pieces.into_iter().map(|p| Token::new(text, p, Some(core))));
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterConfig {
    pub common_words: HashSet<String>,
    pub filter_punctuation: bool,
    pub filter_numeric: bool,
    /// Also match the lowercased surface against the common-word list.
    pub fold_case: bool,
}

impl FilterConfig {
    pub fn new(common_words: HashSet<String>) -> Self {
        FilterConfig {
            common_words,
            filter_punctuation: true,
            filter_numeric: true,
            fold_case: true,
        }
    }

    /// Load the common-word list: one word per line, anything after a TAB is
    /// ignored.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!(
                "cannot read common-word list {}: {e}",
                path.display()
            ))
        })?;
        let words = text
            .lines()
            .filter_map(|l| l.split('\t').next())
            .map(str::trim)
            .filter(|w| !w.is_empty())
            .map(str::to_string)
            .collect();
        Ok(FilterConfig::new(words))
    }

    pub fn matches(&self, token: &Token) -> bool {
        match token.kind {
            TokenKind::Punctuation => self.filter_punctuation,
            TokenKind::Numeric => self.filter_numeric,
            TokenKind::Word => {
                self.common_words.contains(&token.surface)
                    || (self.fold_case
                        && self.common_words.contains(&token.surface.to_lowercase()))
            }
        }
    }
}

/// Mark tokens that never need correction. Count and order are preserved.
pub fn apply_filters(mut tokens: Vec<Token>, filters: &FilterConfig) -> Vec<Token> {
    for token in &mut tokens {
        token.filtered = filters.matches(token);
    }
    tokens
}
