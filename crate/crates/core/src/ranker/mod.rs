//! Candidate ranking with a boosted regression-tree ensemble.
//!
//! Training rows are candidate feature vectors labeled 1 for the intended
//! correction and 0 otherwise. Positives are up-weighted by the
//! negative/positive ratio to offset the class imbalance.

pub mod boost;
pub mod tree;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidate_search::levenshtein;
use crate::detector::DetectedError;
use crate::error::{Error, Result};
use crate::feature_scoring::{score_all, ScoredCandidate, ScoringResources, LANGUAGE_POPULARITY};

pub use boost::{BoostReport, Stage, StopReason};
pub use tree::{RegressionTree, TreeNode, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A scored correction candidate, optionally labeled and/or ranked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub surface: String,
    pub features: Vec<f64>,
    pub label: Option<u8>,
    pub confidence: Option<f64>,
}

impl From<ScoredCandidate> for Candidate {
    fn from(s: ScoredCandidate) -> Self {
        Candidate {
            surface: s.surface,
            features: s.features,
            label: None,
            confidence: None,
        }
    }
}

/// A detected (or ground-truth) error with its intended word.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledError {
    pub id: usize,
    pub error: DetectedError,
    pub intended: String,
}

/// Candidate indices ranked by one feature: score descending, then surface.
pub fn feature_top_k(scored: &[ScoredCandidate], feature: usize, top_k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scored.len()).collect();
    idx.sort_by(|&a, &b| {
        scored[b].features[feature]
            .total_cmp(&scored[a].features[feature])
            .then_with(|| scored[a].surface.cmp(&scored[b].surface))
    });
    idx.truncate(top_k);
    idx
}

/// Union over features of each feature's top-k candidates, in input order.
pub fn top_k_pool(scored: &[ScoredCandidate], top_k: usize) -> Vec<usize> {
    let n_features = scored.first().map_or(0, |s| s.features.len());
    let pool: BTreeSet<usize> = (0..n_features)
        .flat_map(|f| feature_top_k(scored, f, top_k))
        .collect();
    pool.into_iter().collect()
}

/// Candidates and pool for one labeled error.
#[derive(Debug, Clone)]
pub struct ErrorCandidates {
    pub id: usize,
    pub surface: String,
    pub intended: String,
    pub scored: Vec<ScoredCandidate>,
    pub pool: Vec<usize>,
}

impl ErrorCandidates {
    pub fn pool_contains_intended(&self) -> bool {
        self.pool.iter().any(|&i| self.scored[i].surface == self.intended)
    }

    /// Whether the intended word is within search distance of the error.
    pub fn in_scope(&self, delta: usize) -> bool {
        levenshtein(&self.surface, &self.intended) <= delta
    }
}

/// Search and score candidates for every error, in parallel; output order
/// follows the input.
pub fn score_errors(errors: &[LabeledError], resources: &ScoringResources, top_k: usize) -> Result<Vec<ErrorCandidates>> {
    errors
        .par_iter()
        .map(|e| {
            let set = resources.candidates(e.error.surface())?;
            let scored = score_all(&e.error, &set, resources)?;
            let pool = top_k_pool(&scored, top_k);
            Ok(ErrorCandidates {
                id: e.id,
                surface: e.error.surface().to_string(),
                intended: e.intended.clone(),
                scored,
                pool,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub error_id: usize,
    pub surface: String,
    pub features: Vec<f64>,
    pub label: u8,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub feature_names: Vec<String>,
    pub rows: Vec<TrainingRow>,
    pub positives: usize,
    pub negatives: usize,
    /// Errors discarded because their pool lacked the intended word.
    pub dropped_errors: usize,
}

impl TrainingSet {
    /// Assemble rows and assign class-balancing weights: label-1 rows weigh
    /// `#negatives / #positives`, label-0 rows weigh 1.
    pub fn from_rows(feature_names: Vec<String>, rows: Vec<(usize, String, Vec<f64>, u8)>) -> Result<Self> {
        let positives = rows.iter().filter(|r| r.3 == 1).count();
        let negatives = rows.len() - positives;
        if positives == 0 {
            return Err(Error::TrainingData("no positive rows".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.2.len() != feature_names.len()) {
            return Err(Error::TrainingData(format!(
                "row for {:?} has {} features, expected {}",
                r.1,
                r.2.len(),
                feature_names.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.3 > 1) {
            return Err(Error::TrainingData(format!("label {} is not 0 or 1", r.3)));
        }
        let pos_weight = negatives as f64 / positives as f64;
        let rows = rows
            .into_iter()
            .map(|(error_id, surface, features, label)| TrainingRow {
                error_id,
                surface,
                features,
                label,
                weight: if label == 1 { pos_weight } else { 1.0 },
            })
            .collect();
        Ok(TrainingSet {
            feature_names,
            rows,
            positives,
            negatives,
            dropped_errors: 0,
        })
    }

    pub fn error_ids(&self) -> Vec<usize> {
        let ids: BTreeSet<usize> = self.rows.iter().map(|r| r.error_id).collect();
        ids.into_iter().collect()
    }

    /// Rows of the given errors, reweighted for the subset.
    pub fn subset(&self, error_ids: &HashSet<usize>) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .filter(|r| error_ids.contains(&r.error_id))
            .map(|r| (r.error_id, r.surface.clone(), r.features.clone(), r.label))
            .collect();
        Self::from_rows(self.feature_names.clone(), rows)
    }

    /// TSV with a header `error_id surface label <features...>`.
    pub fn write_tsv(&self, mut out: impl Write) -> std::io::Result<()> {
        write!(out, "error_id\tsurface\tlabel")?;
        for name in &self.feature_names {
            write!(out, "\t{name}")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(out, "{}\t{}\t{}", r.error_id, r.surface, r.label)?;
            for v in &r.features {
                write!(out, "\t{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
        if header.len() < 3 || header[..3] != ["error_id", "surface", "label"] {
            return Err(Error::Parse {
                file: path.to_path_buf(),
                line: 1,
                message: "expected header error_id, surface, label, <features>".into(),
            });
        }
        let names: Vec<String> = header[3..].iter().map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let err = |message: String| Error::Parse {
                file: path.to_path_buf(),
                line: i + 2,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != header.len() {
                return Err(err(format!("expected {} columns, found {}", header.len(), cols.len())));
            }
            let id = cols[0].parse().map_err(|_| err(format!("bad error id {:?}", cols[0])))?;
            let label = cols[2].parse().map_err(|_| err(format!("bad label {:?}", cols[2])))?;
            let features = cols[3..]
                .iter()
                .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad feature value {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push((id, cols[1].to_string(), features, label));
        }
        Self::from_rows(names, rows)
    }
}

/// Build training rows from labeled errors: each error contributes its
/// union-of-top-k candidate pool; errors whose pool misses the intended word
/// are dropped.
pub fn build_training_set(errors: &[LabeledError], resources: &ScoringResources, top_k: usize) -> Result<TrainingSet> {
    let scored = score_errors(errors, resources, top_k)?;
    training_set_from_scored(&scored, resources.feature_names())
}

pub fn training_set_from_scored(scored: &[ErrorCandidates], feature_names: Vec<String>) -> Result<TrainingSet> {
    let mut rows = Vec::new();
    let mut dropped = 0;
    for e in scored {
        if !e.pool_contains_intended() {
            dropped += 1;
            continue;
        }
        for &i in &e.pool {
            let c = &e.scored[i];
            let label = u8::from(c.surface == e.intended);
            rows.push((e.id, c.surface.clone(), c.features.clone(), label));
        }
    }
    if rows.is_empty() {
        return Err(Error::TrainingData(format!(
            "no error has its intended word among the candidates ({dropped} dropped)"
        )));
    }
    let mut set = TrainingSet::from_rows(feature_names, rows)?;
    set.dropped_errors = dropped;
    Ok(set)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub n_stages: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub loss: LossKind,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            n_stages: 50,
            max_depth: 3,
            min_samples_leaf: 2,
            loss: LossKind::Linear,
        }
    }
}

impl Hyperparameters {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_leaf: self.min_samples_leaf,
        }
    }

    /// Stages {25, 50, 100} x depth {2, 3, 4}.
    pub fn default_grid() -> Vec<Hyperparameters> {
        let mut grid = Vec::new();
        for n_stages in [25, 50, 100] {
            for max_depth in [2, 3, 4] {
                grid.push(Hyperparameters {
                    n_stages,
                    max_depth,
                    ..Default::default()
                });
            }
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingModel {
    pub format_version: u32,
    pub feature_order: Vec<String>,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub stages: Vec<Stage>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl RankingModel {
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_order.len() {
            return Err(Error::Usage(format!(
                "model expects {} features [{}], got {}",
                self.feature_order.len(),
                self.feature_order.join(", "),
                features.len()
            )));
        }
        Ok(boost::predict_stages(&self.stages, features))
    }

    /// Fail unless `names` matches the training feature order.
    pub fn check_features(&self, names: &[String]) -> Result<()> {
        if names != self.feature_order.as_slice() {
            return Err(Error::Usage(format!(
                "feature mismatch: model expects [{}], configuration yields [{}]",
                self.feature_order.join(", "),
                names.join(", ")
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                probe.format_version
            )));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn popularity_index(&self) -> Option<usize> {
        self.feature_order.iter().position(|n| n == LANGUAGE_POPULARITY)
    }
}

pub fn train(data: &TrainingSet, hyper: Hyperparameters, seed: u64) -> Result<(RankingModel, BoostReport)> {
    if data.positives == 0 || data.negatives == 0 {
        return Err(Error::TrainingData(format!(
            "training needs both labels ({} positive, {} negative rows)",
            data.positives, data.negatives
        )));
    }
    let x: Vec<Vec<f64>> = data.rows.iter().map(|r| r.features.clone()).collect();
    let y: Vec<f64> = data.rows.iter().map(|r| f64::from(r.label)).collect();
    let w: Vec<f64> = data.rows.iter().map(|r| r.weight).collect();
    let (stages, report) = boost::fit(&x, &y, &w, hyper.n_stages, hyper.tree_params());
    if report.is_warning() {
        log::warn!("boosting stopped early: {:?} after {} stage(s)", report.stop, stages.len());
    }
    Ok((
        RankingModel {
            format_version: MODEL_FORMAT_VERSION,
            feature_order: data.feature_names.clone(),
            hyperparameters: hyper,
            seed,
            stages,
        },
        report,
    ))
}

/// Order candidates by confidence, then language popularity, then surface.
pub fn rank(model: &RankingModel, candidates: Vec<Candidate>) -> Result<Vec<Candidate>> {
    let mut scored = candidates
        .into_iter()
        .map(|mut c| {
            c.confidence = Some(model.predict(&c.features)?);
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let pop = model.popularity_index();
    scored.sort_by(|a, b| compare_ranked(a, b, pop));
    Ok(scored)
}

fn compare_ranked(a: &Candidate, b: &Candidate, popularity: Option<usize>) -> Ordering {
    let conf = |c: &Candidate| c.confidence.unwrap_or(f64::NEG_INFINITY);
    conf(b)
        .total_cmp(&conf(a))
        .then_with(|| match popularity {
            Some(i) => b.features[i].total_cmp(&a.features[i]),
            None => Ordering::Equal,
        })
        .then_with(|| a.surface.cmp(&b.surface))
}

/// Split error ids into (train, test) with a seeded shuffle.
pub fn train_test_split(ids: &[usize], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = ids.to_vec();
    shuffled.sort_unstable();
    shuffled.dedup();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((shuffled.len() as f64) * train_fraction.clamp(0.0, 1.0)).round() as usize;
    let mut train = shuffled[..n_train].to_vec();
    let mut test = shuffled[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Assign each error id to one fold.
pub fn fold_assignment(ids: &[usize], folds: usize, seed: u64) -> Result<BTreeMap<usize, usize>> {
    if folds < 2 {
        return Err(Error::Usage("cross-validation needs at least 2 folds".into()));
    }
    let mut shuffled = ids.to_vec();
    shuffled.sort_unstable();
    shuffled.dedup();
    if folds > shuffled.len() {
        return Err(Error::Usage(format!(
            "{folds} folds requested but only {} errors available",
            shuffled.len()
        )));
    }
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(shuffled.into_iter().enumerate().map(|(i, id)| (id, i % folds)).collect())
}

/// Fraction of errors whose top-ranked row carries label 1.
pub fn precision_at_one(model: &RankingModel, data: &TrainingSet, error_ids: &HashSet<usize>) -> Result<f64> {
    let mut groups: BTreeMap<usize, Vec<Candidate>> = BTreeMap::new();
    for r in data.rows.iter().filter(|r| error_ids.contains(&r.error_id)) {
        groups.entry(r.error_id).or_default().push(Candidate {
            surface: r.surface.clone(),
            features: r.features.clone(),
            label: Some(r.label),
            confidence: None,
        });
    }
    if groups.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for cands in groups.values() {
        let ranked = rank(model, cands.clone())?;
        if ranked.first().and_then(|c| c.label) == Some(1) {
            hits += 1;
        }
    }
    Ok(hits as f64 / groups.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub hyperparameters: Hyperparameters,
    pub fold_precision_at_1: Vec<f64>,
    pub mean_precision_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub best: Hyperparameters,
    pub folds: usize,
    pub results: Vec<GridResult>,
}

/// K-fold cross-validation over a hyperparameter grid. Folds partition
/// errors, never splitting one error's candidates. Ties in mean P@1 go to
/// the earlier grid point.
pub fn cross_validate(data: &TrainingSet, grid: &[Hyperparameters], folds: usize, seed: u64) -> Result<CvReport> {
    if grid.is_empty() {
        return Err(Error::Usage("empty hyperparameter grid".into()));
    }
    let assignment = fold_assignment(&data.error_ids(), folds, seed)?;
    let fold_sets: Vec<HashSet<usize>> = (0..folds)
        .map(|k| assignment.iter().filter(|&(_, &f)| f == k).map(|(&id, _)| id).collect())
        .collect();
    for (i, a) in fold_sets.iter().enumerate() {
        for b in &fold_sets[i + 1..] {
            assert!(a.is_disjoint(b), "an error appears in two folds");
        }
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len()).flat_map(|g| (0..folds).map(move |k| (g, k))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(g, k)| {
            let train_ids: HashSet<usize> = assignment.iter().filter(|&(_, &f)| f != k).map(|(&id, _)| id).collect();
            let train_set = data.subset(&train_ids)?;
            let (model, _) = train(&train_set, grid[g], seed)?;
            precision_at_one(&model, data, &fold_sets[k])
        })
        .collect::<Result<_>>()?;

    let results: Vec<GridResult> = grid
        .iter()
        .enumerate()
        .map(|(g, h)| {
            let fold_scores = scores[g * folds..(g + 1) * folds].to_vec();
            let mean = fold_scores.iter().sum::<f64>() / folds as f64;
            GridResult {
                hyperparameters: *h,
                fold_precision_at_1: fold_scores,
                mean_precision_at_1: mean,
            }
        })
        .collect();
    let best = results
        .iter()
        .fold(None::<&GridResult>, |best, r| match best {
            Some(b) if b.mean_precision_at_1 >= r.mean_precision_at_1 => Some(b),
            _ => Some(r),
        })
        .map(|r| r.hyperparameters)
        .expect("grid is non-empty");
    Ok(CvReport { best, folds, results })
}
