//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 42
//!
//! [paths]
//! unigram_files = ["data/1gm.txt"]
//! ngram_files = ["data/5gm.txt"]
//! lexicon = "data/words.txt"      # optional, defaults to the unigram vocabulary
//! common_words = "data/common.txt"
//! model = "model.json"
//! feature_lexicons = [{ name = "names", path = "data/names.txt" }]
//!
//! [detection]
//! window_order = 5
//! context_threshold = 1
//! unigram_threshold_by_length = { 1 = 1000000, 2 = 100000, 3 = 10000, 4 = 1000, 7 = 200 }
//!
//! [scoring]
//! delta = 3
//! alphas = [0.25, 0.25, 0.25, 0.25]
//! similarity_normalization = "sum-of-lengths"
//!
//! [ranker]
//! n_stages = 50
//! max_depth = 3
//! ```
//!
//! Relative paths resolve against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detector::DetectionThresholds;
use crate::error::{Error, Result};
use crate::feature_scoring::ScoringSettings;
use crate::ngram_index::Count;
use crate::ranker::{Hyperparameters, LossKind};
use crate::text_pipeline::TokenizerRules;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconPath {
    pub name: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub unigram_files: Vec<PathBuf>,
    /// N-gram files of order `detection.window_order`.
    pub ngram_files: Vec<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub feature_lexicons: Vec<LexiconPath>,
    pub common_words: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Where index caches go; next to the first input file when unset.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    pub filter_punctuation: bool,
    pub filter_numeric: bool,
    pub fold_case: bool,
}

impl Default for FilterSettings {
    fn default() -> Self {
        FilterSettings {
            filter_punctuation: true,
            filter_numeric: true,
            fold_case: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconSettings {
    /// Minimum unigram count when the lexicon comes from the unigram
    /// vocabulary.
    pub min_freq: Count,
    /// Name of the main lexicon in feature names.
    pub name: String,
}

impl Default for LexiconSettings {
    fn default() -> Self {
        LexiconSettings {
            min_freq: 1,
            name: "english".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankerSettings {
    pub n_stages: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub loss: LossKind,
    /// Per-feature pool size when building training rows.
    pub top_k: usize,
    pub train_fraction: f64,
    /// Cross-validation folds; 0 disables the grid search.
    pub cv_folds: usize,
    /// Grid for cross-validation; empty means the built-in grid.
    pub grid: Vec<Hyperparameters>,
}

impl Default for RankerSettings {
    fn default() -> Self {
        let h = Hyperparameters::default();
        RankerSettings {
            n_stages: h.n_stages,
            max_depth: h.max_depth,
            min_samples_leaf: h.min_samples_leaf,
            loss: h.loss,
            top_k: 10,
            train_fraction: 0.8,
            cv_folds: 0,
            grid: Vec::new(),
        }
    }
}

impl RankerSettings {
    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            n_stages: self.n_stages,
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
            loss: self.loss,
        }
    }

    pub fn grid(&self) -> Vec<Hyperparameters> {
        if self.grid.is_empty() {
            Hyperparameters::default_grid()
        } else {
            self.grid.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub paths: Paths,
    pub tokenizer: TokenizerRules,
    pub filters: FilterSettings,
    pub lexicon: LexiconSettings,
    pub detection: DetectionThresholds,
    pub scoring: ScoringSettings,
    pub ranker: RankerSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            paths: Paths::default(),
            tokenizer: TokenizerRules::default(),
            filters: FilterSettings::default(),
            lexicon: LexiconSettings::default(),
            detection: DetectionThresholds::default(),
            scoring: ScoringSettings::default(),
            ranker: RankerSettings::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse, resolve relative paths against the file's directory, validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let config = Self::read(path)?;
        config.validate()?;
        Ok(config)
    }

    /// Parse and resolve paths without validating, so callers can apply
    /// overrides first.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(dir) = path.parent() {
            config.resolve_paths(dir);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let paths = &mut self.paths;
        paths.unigram_files.iter_mut().for_each(fix);
        paths.ngram_files.iter_mut().for_each(fix);
        paths.feature_lexicons.iter_mut().for_each(|l| fix(&mut l.path));
        for p in [&mut paths.lexicon, &mut paths.common_words, &mut paths.model, &mut paths.cache_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Check value ranges and that referenced input files exist. The model
    /// path is not checked since `train` creates it.
    pub fn validate(&self) -> Result<()> {
        let s = &self.scoring;
        let f = &s.features;
        if (f.exact_context || f.relaxed_context) && self.detection.window_order < 2 {
            return Err(Error::Config(format!(
                "detection.window_order must be at least 2 for context features, got {}",
                self.detection.window_order
            )));
        }
        if self.detection.window_order < 1 {
            return Err(Error::Config("detection.window_order must be at least 1".into()));
        }
        if s.alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Config(format!(
                "scoring.alphas must be finite and non-negative, got {:?}",
                s.alphas
            )));
        }
        let r = &self.ranker;
        if !(r.train_fraction > 0.0 && r.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "ranker.train_fraction must lie in (0, 1), got {}",
                r.train_fraction
            )));
        }
        if r.top_k == 0 {
            return Err(Error::Config("ranker.top_k must be positive".into()));
        }
        if r.cv_folds == 1 {
            return Err(Error::Config("ranker.cv_folds must be 0 (off) or at least 2".into()));
        }
        for h in std::iter::once(r.hyperparameters()).chain(r.grid.iter().copied()) {
            if h.n_stages == 0 {
                return Err(Error::Config("ranker stage count must be positive".into()));
            }
        }
        let p = &self.paths;
        let files = p
            .unigram_files
            .iter()
            .chain(&p.ngram_files)
            .chain(p.feature_lexicons.iter().map(|l| &l.path))
            .chain(p.lexicon.iter())
            .chain(p.common_words.iter());
        for file in files {
            if !file.is_file() {
                return Err(Error::Config(format!("file not found: {}", file.display())));
            }
        }
        Ok(())
    }
}
