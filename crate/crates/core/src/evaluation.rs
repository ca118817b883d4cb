//! Ground-truth alignment, error categorization and metrics.
//!
//! Truth and OCR token streams are aligned token by token; every non-match
//! operation of the minimal alignment becomes one [`GroundTruthError`]
//! addressed by its OCR token range. Detections are then matched against
//! those ranges: an exact range match is *bounded*, an overlap is
//! *unbounded*, a detection outside every range is a *false positive*.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffTag};

use crate::candidate_search::levenshtein;
use crate::detector::DetectedError;
use crate::error::{Error, Result};
use crate::feature_scoring::ScoringResources;
use crate::ranker::{feature_top_k, rank, score_errors, Candidate, ErrorCandidates, LabeledError, RankingModel};
use crate::text_pipeline::{tokenize, Span, Token, TokenKind, TokenizerRules};

pub const DEFAULT_PRECISION_RANKS: [usize; 4] = [1, 3, 5, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Substitution,
    /// One truth word broken into several OCR tokens.
    Split,
    /// Several truth words fused into one OCR token.
    Merge,
    /// OCR token with no truth counterpart.
    Insertion,
    /// Truth word missing from the OCR text.
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthError {
    pub intended: String,
    pub observed: String,
    /// Byte span in the OCR text; empty for deletions.
    pub span: Span,
    /// Range of OCR token indices; empty for deletions.
    pub tokens: Range<usize>,
    pub levenshtein_distance: usize,
    pub kind: ErrorKind,
}

fn join_surfaces(tokens: &[&Token]) -> String {
    tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ")
}

fn concat_surfaces(tokens: &[&Token]) -> String {
    tokens.iter().map(|t| t.surface.as_str()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Move {
    /// (truth tokens, ocr tokens)
    Pair(usize, usize),
    Delete,
    Insert,
}

const MAX_GROUP: usize = 3;
const MAX_HUNK_CELLS: usize = 4_000_000;

/// Minimal-cost alignment of one mismatch hunk. Costs: substitution is the
/// character distance, insertion/deletion the token length, split/merge the
/// distance between the concatenations.
fn align_hunk(truth: &[&Token], ocr: &[&Token]) -> Vec<(Move, usize, usize)> {
    let (m, k) = (truth.len(), ocr.len());
    let clen = |t: &Token| t.surface.chars().count();
    if (m + 1) * (k + 1) > MAX_HUNK_CELLS {
        log::warn!("alignment hunk of {m}x{k} tokens too large; pairing positionally");
        let mut out = Vec::new();
        for i in 0..m.min(k) {
            out.push((Move::Pair(1, 1), i, i));
        }
        for i in k..m {
            out.push((Move::Delete, i, k));
        }
        for j in m..k {
            out.push((Move::Insert, m, j));
        }
        return out;
    }
    let mut cost = vec![usize::MAX; (m + 1) * (k + 1)];
    let mut back = vec![(Move::Delete, 0usize, 0usize); (m + 1) * (k + 1)];
    let at = |i: usize, j: usize| i * (k + 1) + j;
    cost[0] = 0;
    for i in 0..=m {
        for j in 0..=k {
            let here = cost[at(i, j)];
            if here == usize::MAX {
                continue;
            }
            let mut relax = |ni: usize, nj: usize, c: usize, mv: Move| {
                let total = here + c;
                if total < cost[at(ni, nj)] {
                    cost[at(ni, nj)] = total;
                    back[at(ni, nj)] = (mv, i, j);
                }
            };
            if i < m && j < k {
                relax(i + 1, j + 1, levenshtein(&truth[i].surface, &ocr[j].surface), Move::Pair(1, 1));
            }
            for g in 2..=MAX_GROUP {
                if i < m && j + g <= k {
                    let c = levenshtein(&truth[i].surface, &concat_surfaces(&ocr[j..j + g]));
                    relax(i + 1, j + g, c, Move::Pair(1, g));
                }
                if i + g <= m && j < k {
                    let c = levenshtein(&concat_surfaces(&truth[i..i + g]), &ocr[j].surface);
                    relax(i + g, j + 1, c, Move::Pair(g, 1));
                }
            }
            if i < m {
                relax(i + 1, j, clen(truth[i]), Move::Delete);
            }
            if j < k {
                relax(i, j + 1, clen(ocr[j]), Move::Insert);
            }
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (m, k);
    while i > 0 || j > 0 {
        let (mv, pi, pj) = back[at(i, j)];
        out.push((mv, pi, pj));
        i = pi;
        j = pj;
    }
    out.reverse();
    out
}

/// Align OCR tokens against truth tokens and list every mismatch.
/// Punctuation tokens are ignored on both sides; token indices in the
/// result refer to positions in `ocr_tokens`.
pub fn align(ocr_tokens: &[Token], truth_tokens: &[Token]) -> Result<Vec<GroundTruthError>> {
    let keep = |t: &&Token| t.kind != TokenKind::Punctuation;
    let truth: Vec<&Token> = truth_tokens.iter().filter(keep).collect();
    if truth.is_empty() {
        return Err(Error::Usage("ground-truth text has no tokens".into()));
    }
    let ocr_pos: Vec<usize> = (0..ocr_tokens.len()).filter(|&i| keep(&&ocr_tokens[i])).collect();
    let ocr: Vec<&Token> = ocr_pos.iter().map(|&i| &ocr_tokens[i]).collect();

    let truth_s: Vec<&str> = truth.iter().map(|t| t.surface.as_str()).collect();
    let ocr_s: Vec<&str> = ocr.iter().map(|t| t.surface.as_str()).collect();

    // Merge adjacent non-equal diff ops into hunks.
    let mut hunks: Vec<(Range<usize>, Range<usize>)> = Vec::new();
    let mut open: Option<(Range<usize>, Range<usize>)> = None;
    for op in capture_diff_slices(Algorithm::Myers, &truth_s, &ocr_s) {
        let (tag, t, o) = op.as_tag_tuple();
        if tag == DiffTag::Equal {
            hunks.extend(open.take());
            continue;
        }
        open = Some(match open.take() {
            Some((ot, oo)) => (ot.start..t.end.max(ot.end), oo.start..o.end.max(oo.end)),
            None => (t, o),
        });
    }
    hunks.extend(open);

    let mut errors = Vec::new();
    for (t_range, o_range) in hunks {
        let t_slice = &truth[t_range.clone()];
        let o_slice = &ocr[o_range.clone()];
        for (mv, i, j) in align_hunk(t_slice, o_slice) {
            let (tn, on) = match mv {
                Move::Pair(a, b) => (a, b),
                Move::Delete => (1, 0),
                Move::Insert => (0, 1),
            };
            let t_toks = &t_slice[i..i + tn];
            let o_toks = &o_slice[j..j + on];
            let intended = join_surfaces(t_toks);
            let observed = join_surfaces(o_toks);
            if intended == observed {
                continue;
            }
            let kind = match (tn, on) {
                (_, 0) => ErrorKind::Deletion,
                (0, _) => ErrorKind::Insertion,
                (1, 1) => ErrorKind::Substitution,
                (1, _) => ErrorKind::Split,
                _ => ErrorKind::Merge,
            };
            let (tokens, span) = if on == 0 {
                // Anchor deletions at the next OCR token (or the end).
                let oj = o_range.start + j;
                let pos = ocr_pos.get(oj).copied().unwrap_or(ocr_tokens.len());
                let byte = ocr_tokens.get(pos).map_or_else(
                    || ocr_tokens.last().map_or(0, |t| t.span.end),
                    |t| t.span.start,
                );
                (pos..pos, Span::new(byte, byte))
            } else {
                let first = ocr_pos[o_range.start + j];
                let last = ocr_pos[o_range.start + j + on - 1];
                (
                    first..last + 1,
                    Span::new(ocr_tokens[first].span.start, ocr_tokens[last].span.end),
                )
            };
            errors.push(GroundTruthError {
                levenshtein_distance: levenshtein(&intended, &observed),
                intended,
                observed,
                span,
                tokens,
                kind,
            });
        }
    }
    Ok(errors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Bounded,
    Unbounded,
    FalsePositive,
    Missed,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Bounded => "bounded",
            Category::Unbounded => "unbounded",
            Category::FalsePositive => "false_positive",
            Category::Missed => "missed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub category: Category,
    pub ground_truth: Option<GroundTruthError>,
    /// Indices into the detection list. Several detections may land on one
    /// truth error; they share its single outcome.
    pub detections: Vec<usize>,
}

impl DetectionOutcome {
    /// Index of the detection that represents this outcome, if any.
    pub fn primary_detection(&self) -> Option<usize> {
        self.detections.first().copied()
    }
}

/// Match detections against truth errors. Each truth error yields exactly
/// one outcome; each detection is listed in exactly one outcome.
pub fn categorize(detections: &[DetectedError], truth: &[GroundTruthError]) -> Vec<DetectionOutcome> {
    let mut claimed = vec![false; detections.len()];
    let mut outcomes = Vec::with_capacity(truth.len());
    for t in truth {
        let overlapping: Vec<usize> = (0..detections.len())
            .filter(|&d| !claimed[d] && t.tokens.contains(&detections[d].position))
            .collect();
        let exact = overlapping
            .iter()
            .copied()
            .find(|&d| t.tokens == (detections[d].position..detections[d].position + 1));
        let (category, mut dets) = match (exact, overlapping.is_empty()) {
            (Some(_), _) => (Category::Bounded, overlapping.clone()),
            (None, false) => (Category::Unbounded, overlapping.clone()),
            (None, true) => (Category::Missed, Vec::new()),
        };
        // The exact match, if any, leads.
        if let Some(e) = exact {
            dets.retain(|&d| d != e);
            dets.insert(0, e);
        }
        for &d in &dets {
            claimed[d] = true;
        }
        outcomes.push(DetectionOutcome {
            category,
            ground_truth: Some(t.clone()),
            detections: dets,
        });
    }
    for (d, _) in claimed.iter().enumerate().filter(|(_, c)| !**c) {
        outcomes.push(DetectionOutcome {
            category: Category::FalsePositive,
            ground_truth: None,
            detections: vec![d],
        });
    }
    outcomes
}

/// A detected error with its category and intended word.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorizedError {
    pub category: Category,
    pub labeled: LabeledError,
}

/// Turn every outcome that has a detection into a labeled error. False
/// positives take the detected word itself as the intended word.
pub fn labeled_errors(outcomes: &[DetectionOutcome], detections: &[DetectedError]) -> Vec<CategorizedError> {
    outcomes
        .iter()
        .filter_map(|o| {
            let d = &detections[o.primary_detection()?];
            let intended = match &o.ground_truth {
                Some(t) => t.intended.clone(),
                None => d.surface().to_string(),
            };
            Some((o.category, d.clone(), intended))
        })
        .enumerate()
        .map(|(id, (category, error, intended))| CategorizedError {
            category,
            labeled: LabeledError { id, error, intended },
        })
        .collect()
}

/// Detection confusion matrix. Each truth error counts once on the error
/// row; each evaluated word token outside every truth error counts once on
/// the correct row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub error_detected: usize,
    pub error_not_detected: usize,
    pub correct_detected: usize,
    pub correct_not_detected: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.error_detected + self.error_not_detected + self.correct_detected + self.correct_not_detected
    }

    pub fn detected(&self) -> usize {
        self.error_detected + self.correct_detected
    }
}

/// `evaluated` marks the OCR tokens the detector was allowed to flag.
pub fn confusion(outcomes: &[DetectionOutcome], ocr_tokens: &[Token], evaluated: impl Fn(&Token) -> bool) -> Confusion {
    let mut in_error = vec![false; ocr_tokens.len()];
    let mut c = Confusion::default();
    for o in outcomes {
        match o.category {
            Category::Bounded | Category::Unbounded => c.error_detected += 1,
            Category::Missed => c.error_not_detected += 1,
            Category::FalsePositive => c.correct_detected += 1,
        }
        if let Some(t) = &o.ground_truth {
            for i in t.tokens.clone() {
                in_error[i] = true;
            }
        }
    }
    let evaluated_correct = ocr_tokens
        .iter()
        .zip(&in_error)
        .filter(|(t, e)| !**e && evaluated(t))
        .count();
    c.correct_not_detected = evaluated_correct.saturating_sub(c.correct_detected);
    c
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecall {
    pub total: f64,
    pub bounded: f64,
    pub unbounded: f64,
}

pub fn detection_recall(outcomes: &[DetectionOutcome]) -> DetectionRecall {
    let count = |c: Category| outcomes.iter().filter(|o| o.category == c).count();
    let truth = outcomes.iter().filter(|o| o.ground_truth.is_some()).count();
    let rate = |n: usize| if truth == 0 { 0.0 } else { n as f64 / truth as f64 };
    let (b, u) = (count(Category::Bounded), count(Category::Unbounded));
    DetectionRecall {
        total: rate(b + u),
        bounded: rate(b),
        unbounded: rate(u),
    }
}

/// P@n for each n: the fraction of errors whose intended word is among the
/// first n ranked candidates.
pub fn precision_at<S: AsRef<str>>(ranked: &[Vec<S>], intended: &[S], ns: &[usize]) -> Vec<(usize, f64)> {
    assert_eq!(ranked.len(), intended.len());
    let ranks: Vec<Option<usize>> = ranked
        .iter()
        .zip(intended)
        .map(|(r, want)| r.iter().position(|c| c.as_ref() == want.as_ref()))
        .collect();
    ns.iter()
        .map(|&n| {
            if ranks.is_empty() {
                return (n, 0.0);
            }
            let hits = ranks.iter().filter(|r| r.is_some_and(|p| p < n)).count();
            (n, hits as f64 / ranks.len() as f64)
        })
        .collect()
}

/// Row groups reported for correction metrics.
pub const REPORT_GROUPS: [&str; 5] = ["bounded", "unbounded", "true_positive", "false_positive", "total"];

fn in_group(group: &str, c: Category) -> bool {
    match group {
        "bounded" => c == Category::Bounded,
        "unbounded" => c == Category::Unbounded,
        "true_positive" => matches!(c, Category::Bounded | Category::Unbounded),
        "false_positive" => c == Category::FalsePositive,
        "total" => c != Category::Missed,
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub group: String,
    pub errors: usize,
    pub precision: Vec<(usize, f64)>,
}

/// Ranked candidate surfaces for one evaluated error.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedError {
    pub category: Category,
    pub intended: String,
    pub ranked: Vec<String>,
}

/// Rank each error's candidate pool with the model.
pub fn rank_errors(
    model: &RankingModel,
    scored: &[ErrorCandidates],
    categories: &[Category],
) -> Result<Vec<RankedError>> {
    scored
        .iter()
        .zip(categories)
        .map(|(e, &category)| {
            let pool: Vec<Candidate> = e.pool.iter().map(|&i| Candidate::from(e.scored[i].clone())).collect();
            let ranked = rank(model, pool)?.into_iter().map(|c| c.surface).collect();
            Ok(RankedError {
                category,
                intended: e.intended.clone(),
                ranked,
            })
        })
        .collect()
}

pub fn precision_table(ranked: &[RankedError], ns: &[usize]) -> Vec<PrecisionRow> {
    REPORT_GROUPS
        .iter()
        .map(|&group| {
            let rows: Vec<&RankedError> = ranked.iter().filter(|r| in_group(group, r.category)).collect();
            let lists: Vec<Vec<&str>> = rows.iter().map(|r| r.ranked.iter().map(String::as_str).collect()).collect();
            let intended: Vec<&str> = rows.iter().map(|r| r.intended.as_str()).collect();
            PrecisionRow {
                group: group.to_string(),
                errors: rows.len(),
                precision: precision_at(&lists, &intended, ns),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub group: String,
    pub errors: usize,
    /// Errors whose intended word is within the search distance.
    pub in_scope: usize,
    pub covered: usize,
    pub rate_among_all: f64,
    pub rate_in_scope: f64,
}

/// Fraction of errors whose intended word lands in the candidate pool.
pub fn coverage_from_scored(scored: &[ErrorCandidates], categories: &[Category], delta: usize) -> Vec<CoverageRow> {
    REPORT_GROUPS
        .iter()
        .map(|&group| {
            let mut row = CoverageRow {
                group: group.to_string(),
                errors: 0,
                in_scope: 0,
                covered: 0,
                rate_among_all: 0.0,
                rate_in_scope: 0.0,
            };
            for (e, &c) in scored.iter().zip(categories) {
                if !in_group(group, c) {
                    continue;
                }
                row.errors += 1;
                if e.in_scope(delta) {
                    row.in_scope += 1;
                }
                if e.pool_contains_intended() {
                    row.covered += 1;
                }
            }
            if row.errors > 0 {
                row.rate_among_all = row.covered as f64 / row.errors as f64;
            }
            if row.in_scope > 0 {
                row.rate_in_scope = row.covered as f64 / row.in_scope as f64;
            }
            row
        })
        .collect()
}

pub fn coverage_upper_bound(
    errors: &[CategorizedError],
    resources: &ScoringResources,
    top_k: usize,
) -> Result<Vec<CoverageRow>> {
    let labeled: Vec<LabeledError> = errors.iter().map(|e| e.labeled.clone()).collect();
    let categories: Vec<Category> = errors.iter().map(|e| e.category).collect();
    let scored = score_errors(&labeled, resources, top_k)?;
    Ok(coverage_from_scored(&scored, &categories, resources.settings.delta))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinctivenessRow {
    pub feature: String,
    pub located: usize,
    /// `by_count[c]`: corrections this feature locates that exactly `c + 1`
    /// features locate.
    pub by_count: Vec<usize>,
}

/// For each feature, histogram the corrections it puts in its top-k by how
/// many features do so.
pub fn distinctiveness_from_scored(scored: &[ErrorCandidates], feature_names: &[String], top_k: usize) -> Vec<DistinctivenessRow> {
    let nf = feature_names.len();
    let mut rows: Vec<DistinctivenessRow> = feature_names
        .iter()
        .map(|f| DistinctivenessRow {
            feature: f.clone(),
            located: 0,
            by_count: vec![0; nf],
        })
        .collect();
    for e in scored {
        let located: Vec<bool> = (0..nf)
            .map(|f| {
                feature_top_k(&e.scored, f, top_k)
                    .into_iter()
                    .any(|i| e.scored[i].surface == e.intended)
            })
            .collect();
        let n = located.iter().filter(|&&l| l).count();
        for (f, &l) in located.iter().enumerate() {
            if l {
                rows[f].located += 1;
                rows[f].by_count[n - 1] += 1;
            }
        }
    }
    rows
}

pub fn feature_distinctiveness(
    errors: &[LabeledError],
    resources: &ScoringResources,
    top_k: usize,
) -> Result<Vec<DistinctivenessRow>> {
    let scored = score_errors(errors, resources, top_k)?;
    Ok(distinctiveness_from_scored(&scored, &resources.feature_names(), top_k))
}

pub fn distinctiveness_tsv(rows: &[DistinctivenessRow]) -> String {
    let mut out = String::from("feature\tlocated");
    let nf = rows.first().map_or(0, |r| r.by_count.len());
    for c in 1..=nf {
        let _ = write!(out, "\tby_{c}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}\t{}", r.feature, r.located);
        for v in &r.by_count {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

pub fn coverage_tsv(rows: &[CoverageRow]) -> String {
    let mut out = String::from("group\terrors\tin_scope\tcovered\trate_among_all\trate_in_scope\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}\t{:.6}",
            r.group, r.errors, r.in_scope, r.covered, r.rate_among_all, r.rate_in_scope
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub confusion: Confusion,
    pub outcome_counts: BTreeMap<Category, usize>,
    pub recall: DetectionRecall,
    pub precision: Vec<PrecisionRow>,
    pub coverage: Vec<CoverageRow>,
}

impl MetricsReport {
    /// Machine-readable report: one `section key value` line per number.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("section\tkey\tvalue\n");
        let c = &self.confusion;
        for (k, v) in [
            ("error_detected", c.error_detected),
            ("error_not_detected", c.error_not_detected),
            ("correct_detected", c.correct_detected),
            ("correct_not_detected", c.correct_not_detected),
        ] {
            let _ = writeln!(out, "confusion\t{k}\t{v}");
        }
        for (cat, n) in &self.outcome_counts {
            let _ = writeln!(out, "outcomes\t{}\t{n}", cat.as_str());
        }
        for (k, v) in [
            ("total", self.recall.total),
            ("bounded", self.recall.bounded),
            ("unbounded", self.recall.unbounded),
        ] {
            let _ = writeln!(out, "recall\t{k}\t{v:.6}");
        }
        for row in &self.precision {
            let _ = writeln!(out, "precision\t{}.errors\t{}", row.group, row.errors);
            for (n, p) in &row.precision {
                let _ = writeln!(out, "precision\t{}.p@{n}\t{p:.6}", row.group);
            }
        }
        for row in &self.coverage {
            let _ = writeln!(out, "coverage\t{}.errors\t{}", row.group, row.errors);
            let _ = writeln!(out, "coverage\t{}.in_scope\t{}", row.group, row.in_scope);
            let _ = writeln!(out, "coverage\t{}.covered\t{}", row.group, row.covered);
            let _ = writeln!(out, "coverage\t{}.among_all\t{:.6}", row.group, row.rate_among_all);
            let _ = writeln!(out, "coverage\t{}.in_scope_rate\t{:.6}", row.group, row.rate_in_scope);
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.confusion;
        let _ = writeln!(out, "Detection confusion");
        let _ = writeln!(out, "  {:<10} {:>10} {:>14}", "", "detected", "not detected");
        let _ = writeln!(out, "  {:<10} {:>10} {:>14}", "error", c.error_detected, c.error_not_detected);
        let _ = writeln!(out, "  {:<10} {:>10} {:>14}", "correct", c.correct_detected, c.correct_not_detected);
        let _ = writeln!(
            out,
            "Detection recall: total {:.4}, bounded {:.4}, unbounded {:.4}",
            self.recall.total, self.recall.bounded, self.recall.unbounded
        );
        let _ = writeln!(out, "Correction precision");
        for row in &self.precision {
            let _ = write!(out, "  {:<15} n={:<6}", row.group, row.errors);
            for (n, p) in &row.precision {
                let _ = write!(out, " P@{n}={p:.4}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "Candidate coverage");
        for row in &self.coverage {
            let _ = writeln!(
                out,
                "  {:<15} among all {:.4}, in search scope {:.4}",
                row.group, row.rate_among_all, row.rate_in_scope
            );
        }
        out
    }
}

pub fn outcome_counts(outcomes: &[DetectionOutcome]) -> BTreeMap<Category, usize> {
    let mut counts: BTreeMap<Category, usize> = [
        Category::Bounded,
        Category::Unbounded,
        Category::FalsePositive,
        Category::Missed,
    ]
    .into_iter()
    .map(|c| (c, 0))
    .collect();
    for o in outcomes {
        *counts.entry(o.category).or_default() += 1;
    }
    counts
}

/// One character-confusion rule, e.g. `rn -> m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRule {
    pub from: String,
    pub to: String,
    /// Relative chance of picking this rule among the rules that apply.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Chance that a word token receives one confusion edit.
    pub confusion_rate: f64,
    /// Chance that a word token is split in two.
    pub split_rate: f64,
    /// Chance that a word token is fused with the following word.
    pub merge_rate: f64,
    pub confusions: Vec<ConfusionRule>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            confusion_rate: 0.02,
            split_rate: 0.0,
            merge_rate: 0.0,
            confusions: Vec::new(),
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {p} is not a probability in [0, 1]")))
            }
        };
        prob("confusion_rate", self.confusion_rate)?;
        prob("split_rate", self.split_rate)?;
        prob("merge_rate", self.merge_rate)?;
        prob("total corruption rate", self.confusion_rate + self.split_rate + self.merge_rate)?;
        for r in &self.confusions {
            prob(&format!("probability of {} -> {}", r.from, r.to), r.probability)?;
            if r.from.is_empty() || r.from == r.to {
                return Err(Error::Config(format!("confusion rule {:?} -> {:?} changes nothing", r.from, r.to)));
            }
            if !r.to.chars().all(char::is_alphanumeric) || r.to.is_empty() {
                return Err(Error::Config(format!(
                    "confusion output {:?} must be non-empty and alphanumeric",
                    r.to
                )));
            }
        }
        Ok(())
    }
}

/// A replacement applied by [`synth_corrupt`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub clean_span: Span,
    pub corrupted_span: Span,
    pub original: String,
    pub corrupted: String,
    pub kind: ErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corruption {
    pub text: String,
    pub edits: Vec<Edit>,
    pub truth: Vec<GroundTruthError>,
}

/// Undo recorded edits on a corrupted text.
pub fn restore(corrupted: &str, edits: &[Edit]) -> String {
    let mut out = String::with_capacity(corrupted.len());
    let mut at = 0;
    for e in edits {
        out.push_str(&corrupted[at..e.corrupted_span.start]);
        out.push_str(&e.original);
        at = e.corrupted_span.end;
    }
    out.push_str(&corrupted[at..]);
    out
}

/// Corrupt word tokens of `clean` with confusions, splits and merges.
/// Deterministic per seed; the returned truth list is expressed against the
/// tokenization of the corrupted text under `rules`.
pub fn synth_corrupt(clean: &str, noise: &NoiseSpec, seed: u64, rules: &TokenizerRules) -> Result<Corruption> {
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tokens = tokenize(clean, rules);
    let mut planned: Vec<(Span, String, ErrorKind)> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if t.kind != TokenKind::Word {
            i += 1;
            continue;
        }
        let u: f64 = rng.random();
        if u < noise.confusion_rate {
            if let Some(out) = apply_confusion(&t.surface, &noise.confusions, &mut rng) {
                planned.push((t.span, out, ErrorKind::Substitution));
            }
        } else if u < noise.confusion_rate + noise.split_rate {
            let chars: Vec<(usize, char)> = t.surface.char_indices().collect();
            if chars.len() >= 2 {
                let cut = chars[rng.random_range(1..chars.len())].0;
                let out = format!("{} {}", &t.surface[..cut], &t.surface[cut..]);
                planned.push((t.span, out, ErrorKind::Split));
            }
        } else if u < noise.confusion_rate + noise.split_rate + noise.merge_rate {
            if let Some(next) = tokens.get(i + 1) {
                let gap = &clean[t.span.end..next.span.start];
                if next.kind == TokenKind::Word && gap == " " {
                    let out = format!("{}{}", t.surface, next.surface);
                    planned.push((Span::new(t.span.start, next.span.end), out, ErrorKind::Merge));
                    i += 2;
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut text = String::with_capacity(clean.len());
    let mut edits = Vec::with_capacity(planned.len());
    let mut at = 0;
    for (span, out, kind) in planned {
        text.push_str(&clean[at..span.start]);
        let start = text.len();
        text.push_str(&out);
        edits.push(Edit {
            clean_span: span,
            corrupted_span: Span::new(start, text.len()),
            original: clean[span.start..span.end].to_string(),
            corrupted: out,
            kind,
        });
        at = span.end;
    }
    text.push_str(&clean[at..]);

    let ocr_tokens = tokenize(&text, rules);
    let truth = edits
        .iter()
        .map(|e| {
            let first = ocr_tokens.partition_point(|t| t.span.start < e.corrupted_span.start);
            let last = ocr_tokens.partition_point(|t| t.span.end <= e.corrupted_span.end);
            GroundTruthError {
                intended: e.original.clone(),
                observed: e.corrupted.clone(),
                span: e.corrupted_span,
                tokens: first..last.max(first),
                levenshtein_distance: levenshtein(&e.original, &e.corrupted),
                kind: e.kind,
            }
        })
        .collect();
    Ok(Corruption { text, edits, truth })
}

fn apply_confusion(word: &str, rules: &[ConfusionRule], rng: &mut ChaCha8Rng) -> Option<String> {
    let mut sites: Vec<(usize, usize)> = Vec::new();
    for (r, rule) in rules.iter().enumerate() {
        if rule.probability <= 0.0 {
            continue;
        }
        for (pos, _) in word.match_indices(rule.from.as_str()) {
            sites.push((r, pos));
        }
    }
    if sites.is_empty() {
        return None;
    }
    let total: f64 = sites.iter().map(|&(r, _)| rules[r].probability).sum();
    let mut pick = rng.random::<f64>() * total;
    let mut chosen = *sites.last().expect("non-empty");
    for &s in &sites {
        pick -= rules[s.0].probability;
        if pick < 0.0 {
            chosen = s;
            break;
        }
    }
    let (r, pos) = chosen;
    let rule = &rules[r];
    Some(format!("{}{}{}", &word[..pos], rule.to, &word[pos + rule.from.len()..]))
}

/// Single-character confusion rules mapping each lowercase letter to a
/// visually similar letter or digit.
pub fn default_single_char_confusions() -> Vec<ConfusionRule> {
    const PAIRS: &[(char, char)] = &[
        ('a', 'o'),
        ('b', 'h'),
        ('c', 'e'),
        ('d', 'o'),
        ('e', 'c'),
        ('f', 't'),
        ('g', 'q'),
        ('h', 'b'),
        ('i', 'l'),
        ('j', 'i'),
        ('k', 'x'),
        ('l', '1'),
        ('m', 'n'),
        ('n', 'u'),
        ('o', '0'),
        ('p', 'q'),
        ('q', 'g'),
        ('r', 'n'),
        ('s', '5'),
        ('t', 'f'),
        ('u', 'v'),
        ('v', 'y'),
        ('w', 'v'),
        ('x', 'k'),
        ('y', 'v'),
        ('z', '2'),
    ];
    PAIRS
        .iter()
        .map(|&(a, b)| ConfusionRule {
            from: a.to_string(),
            to: b.to_string(),
            probability: 1.0,
        })
        .collect()
}
