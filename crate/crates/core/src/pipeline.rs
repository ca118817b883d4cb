//! End-to-end flows: load resources, detect, suggest, correct, train and
//! evaluate.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::candidate_search::Lexicon;
use crate::config::Config;
use crate::detector::{detect, DetectedError, DetectionThresholds};
use crate::error::{Error, Result};
use crate::evaluation::{
    align, categorize, confusion, coverage_from_scored, detection_recall, labeled_errors, outcome_counts,
    precision_table, rank_errors, CategorizedError, DetectionOutcome, GroundTruthError, MetricsReport,
    DEFAULT_PRECISION_RANKS,
};
use crate::feature_scoring::{score_all, ScoredCandidate, ScoringResources};
use crate::ngram_index::{default_cache_path, NgramIndex};
use crate::ranker::{
    cross_validate, rank, score_errors, train, train_test_split, training_set_from_scored, BoostReport, Candidate,
    CvReport, ErrorCandidates, LabeledError, RankingModel, TrainingSet,
};
use crate::text_pipeline::{apply_filters, tokenize, FilterConfig, Token, TokenizerRules};

/// Everything a run needs besides the model.
#[derive(Debug, Clone)]
pub struct Resources {
    pub tokenizer: TokenizerRules,
    pub filters: FilterConfig,
    pub thresholds: DetectionThresholds,
    pub scoring: ScoringResources,
}

/// Cache file for an index: inside `cache_dir` when set, otherwise next to
/// the first source file.
pub fn cache_path(config: &Config, files: &[PathBuf], order: usize) -> Option<PathBuf> {
    let default = default_cache_path(files, order)?;
    match &config.paths.cache_dir {
        Some(dir) => Some(dir.join(default.file_name()?)),
        None => Some(default),
    }
}

fn load_index(config: &Config, files: &[PathBuf], order: usize, what: &str) -> Result<NgramIndex> {
    if files.is_empty() {
        return Err(Error::Config(format!("no {what} files configured")));
    }
    let cache = cache_path(config, files, order);
    // Only touch the cache when one is wanted: an explicit cache dir, or a
    // cache already written by `build-index`.
    let cache = cache.filter(|c| config.paths.cache_dir.is_some() || c.is_file());
    NgramIndex::load_or_build(files, order, cache.as_deref())
}

impl Resources {
    pub fn load(config: &Config) -> Result<Self> {
        let paths = &config.paths;
        let unigrams = load_index(config, &paths.unigram_files, 1, "unigram")?;
        let contexts = load_index(config, &paths.ngram_files, config.detection.window_order, "n-gram")?;
        let lexicon = match &paths.lexicon {
            Some(p) => Lexicon::from_file(config.lexicon.name.clone(), p)?,
            None => Lexicon::from_unigrams(config.lexicon.name.clone(), &unigrams, config.lexicon.min_freq)?,
        };
        let feature_lexicons = paths
            .feature_lexicons
            .iter()
            .map(|l| Lexicon::from_file(l.name.clone(), &l.path))
            .collect::<Result<Vec<_>>>()?;
        let common = match &paths.common_words {
            Some(p) => FilterConfig::from_file(p)?.common_words,
            None => HashSet::new(),
        };
        Ok(Self::from_parts(config, unigrams, contexts, lexicon, feature_lexicons, common))
    }

    pub fn from_parts(
        config: &Config,
        unigrams: NgramIndex,
        contexts: NgramIndex,
        lexicon: Lexicon,
        feature_lexicons: Vec<Lexicon>,
        common_words: HashSet<String>,
    ) -> Self {
        let mut filters = FilterConfig::new(common_words);
        filters.filter_punctuation = config.filters.filter_punctuation;
        filters.filter_numeric = config.filters.filter_numeric;
        filters.fold_case = config.filters.fold_case;
        Resources {
            tokenizer: config.tokenizer.clone(),
            filters,
            thresholds: config.detection.clone(),
            scoring: ScoringResources {
                unigrams,
                contexts,
                lexicon,
                feature_lexicons,
                settings: config.scoring.clone(),
            },
        }
    }

    pub fn tokens(&self, text: &str) -> Vec<Token> {
        apply_filters(tokenize(text, &self.tokenizer), &self.filters)
    }

    pub fn detect(&self, tokens: &[Token]) -> Result<Vec<DetectedError>> {
        detect(tokens, &self.scoring.contexts, &self.scoring.unigrams, &self.thresholds)
    }

    /// Whether the detector may flag this token.
    pub fn evaluated(&self, token: &Token) -> bool {
        token.is_word() && !token.filtered
    }
}

#[derive(Debug, Clone)]
pub struct Suggestion {
    pub error: DetectedError,
    pub candidates: Vec<ScoredCandidate>,
}

pub fn suggest(resources: &Resources, errors: &[DetectedError]) -> Result<Vec<Suggestion>> {
    use rayon::prelude::*;
    errors
        .par_iter()
        .map(|e| {
            let set = resources.scoring.candidates(e.surface())?;
            let candidates = score_all(e, &set, &resources.scoring)?;
            Ok(Suggestion {
                error: e.clone(),
                candidates,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CorrectedError {
    pub error: DetectedError,
    /// Ranked pool, best first.
    pub ranked: Vec<Candidate>,
}

#[derive(Debug, Clone)]
pub struct Correction {
    pub text: String,
    pub errors: Vec<CorrectedError>,
}

/// Detect, rank each error's candidate pool and substitute the top
/// candidate. Errors without candidates are left as they are.
pub fn correct(resources: &Resources, model: &RankingModel, text: &str, top_k: usize) -> Result<Correction> {
    model.check_features(&resources.scoring.feature_names())?;
    let tokens = resources.tokens(text);
    let detected = resources.detect(&tokens)?;
    let labeled: Vec<LabeledError> = detected
        .iter()
        .enumerate()
        .map(|(id, e)| LabeledError {
            id,
            error: e.clone(),
            intended: e.surface().to_string(),
        })
        .collect();
    let scored = score_errors(&labeled, &resources.scoring, top_k)?;
    let mut errors = Vec::with_capacity(scored.len());
    for (e, s) in detected.into_iter().zip(scored) {
        let pool = s.pool.iter().map(|&i| Candidate::from(s.scored[i].clone())).collect();
        errors.push(CorrectedError {
            error: e,
            ranked: rank(model, pool)?,
        });
    }

    let mut out = String::with_capacity(text.len());
    let mut at = 0;
    for e in &errors {
        let Some(best) = e.ranked.first() else { continue };
        let span = e.error.token.span;
        out.push_str(&text[at..span.start]);
        out.push_str(&best.surface);
        at = span.end;
    }
    out.push_str(&text[at..]);
    Ok(Correction { text: out, errors })
}

/// A document paired with its ground truth, detected and categorized.
#[derive(Debug, Clone)]
pub struct GroundTruthRun {
    pub ocr_tokens: Vec<Token>,
    pub detections: Vec<DetectedError>,
    pub truth: Vec<GroundTruthError>,
    pub outcomes: Vec<DetectionOutcome>,
    pub errors: Vec<CategorizedError>,
}

impl GroundTruthRun {
    pub fn new(resources: &Resources, ocr_text: &str, truth_text: &str) -> Result<Self> {
        let ocr_tokens = resources.tokens(ocr_text);
        let truth_tokens = tokenize(truth_text, &resources.tokenizer);
        let truth = align(&ocr_tokens, &truth_tokens)?;
        Self::with_truth(resources, ocr_tokens, truth)
    }

    /// Use a known truth list, e.g. one produced by synthetic corruption.
    pub fn with_truth(resources: &Resources, ocr_tokens: Vec<Token>, truth: Vec<GroundTruthError>) -> Result<Self> {
        let detections = resources.detect(&ocr_tokens)?;
        let outcomes = categorize(&detections, &truth);
        let errors = labeled_errors(&outcomes, &detections);
        Ok(GroundTruthRun {
            ocr_tokens,
            detections,
            truth,
            outcomes,
            errors,
        })
    }

    /// Seeded split of the labeled errors into (train, test).
    pub fn split(&self, train_fraction: f64, seed: u64) -> (Vec<CategorizedError>, Vec<CategorizedError>) {
        let ids: Vec<usize> = self.errors.iter().map(|e| e.labeled.id).collect();
        let (train_ids, _) = train_test_split(&ids, train_fraction, seed);
        let train_ids: HashSet<usize> = train_ids.into_iter().collect();
        self.errors.iter().cloned().partition(|e| train_ids.contains(&e.labeled.id))
    }
}

fn labeled(errors: &[CategorizedError]) -> Vec<LabeledError> {
    errors.iter().map(|e| e.labeled.clone()).collect()
}

pub fn training_set(resources: &Resources, errors: &[CategorizedError], top_k: usize) -> Result<TrainingSet> {
    let scored = score_errors(&labeled(errors), &resources.scoring, top_k)?;
    training_set_from_scored(&scored, resources.scoring.feature_names())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: RankingModel,
    pub report: BoostReport,
    pub cv: Option<CvReport>,
}

/// Train on a prepared set, with grid search when `ranker.cv_folds > 1`.
pub fn train_model(config: &Config, data: &TrainingSet) -> Result<TrainOutcome> {
    let r = &config.ranker;
    let (hyper, cv) = if r.cv_folds > 1 {
        let cv = cross_validate(data, &r.grid(), r.cv_folds, config.seed)?;
        (cv.best, Some(cv))
    } else {
        (r.hyperparameters(), None)
    };
    let (model, report) = train(data, hyper, config.seed)?;
    Ok(TrainOutcome { model, report, cv })
}

/// Detection metrics over the whole document; correction metrics and
/// coverage over `errors`.
pub fn evaluate(
    resources: &Resources,
    model: &RankingModel,
    run: &GroundTruthRun,
    errors: &[CategorizedError],
    top_k: usize,
) -> Result<MetricsReport> {
    model.check_features(&resources.scoring.feature_names())?;
    let scored: Vec<ErrorCandidates> = score_errors(&labeled(errors), &resources.scoring, top_k)?;
    let categories: Vec<_> = errors.iter().map(|e| e.category).collect();
    let ranked = rank_errors(model, &scored, &categories)?;
    Ok(MetricsReport {
        confusion: confusion(&run.outcomes, &run.ocr_tokens, |t| resources.evaluated(t)),
        outcome_counts: outcome_counts(&run.outcomes),
        recall: detection_recall(&run.outcomes),
        precision: precision_table(&ranked, &DEFAULT_PRECISION_RANKS),
        coverage: coverage_from_scored(&scored, &categories, resources.scoring.settings.delta),
    })
}

/// Read a text file, reporting invalid UTF-8 with its byte offset.
pub fn read_text(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Decode {
        offset: e.utf8_error().valid_up_to(),
    })
}
