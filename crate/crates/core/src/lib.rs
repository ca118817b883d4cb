//! OCR post-processing toolkit.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`text_pipeline`] tokenizes OCR text and marks tokens that never need
//!    correction (punctuation, numbers, common words).
//! 2. [`detector`] flags suspicious tokens using unigram and n-gram context
//!    frequencies from an [`ngram_index::NgramIndex`].
//! 3. [`candidate_search`] enumerates lexicon terms within a bounded
//!    Levenshtein distance of each flagged token.
//! 4. [`feature_scoring`] scores each candidate with edit distance, string
//!    similarity, language popularity, lexicon existence and exact/relaxed
//!    context popularity.
//! 5. [`ranker`] orders candidates with an AdaBoost.R2 ensemble of
//!    regression trees.
//!
//! [`evaluation`] aligns OCR output with ground truth, categorizes
//! detections and computes detection/correction metrics; [`pipeline`] wires
//! the stages together for the command-line front end.

pub mod candidate_search;
pub mod config;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod feature_scoring;
pub mod ngram_index;
pub mod pipeline;
pub mod ranker;
pub mod text_pipeline;

pub use error::{Error, Result};
