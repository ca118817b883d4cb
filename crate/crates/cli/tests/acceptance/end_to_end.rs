//! Synthetic end-to-end runs, metric identities and CLI reproducibility.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use ocrpost_core::candidate_search::Lexicon;
use ocrpost_core::config::Config;
use ocrpost_core::evaluation::{default_single_char_confusions, synth_corrupt, Category, MetricsReport, NoiseSpec};
use ocrpost_core::ngram_index::NgramIndex;
use ocrpost_core::pipeline::{self, GroundTruthRun, Resources};
use ocrpost_core::text_pipeline::{tokenize, TokenKind, TokenizerRules};

use crate::corpus::{markov_text, vocabulary};

const TOP_K: usize = 10;

pub struct Fixture {
    pub name: &'static str,
    pub run: GroundTruthRun,
    pub report: MetricsReport,
    /// Evaluated word tokens outside every truth error, counted here.
    pub correct_tokens: usize,
}

pub struct EndToEnd {
    pub fixtures: Vec<Fixture>,
    pub corrupted: usize,
    pub tokens: usize,
    pub train_errors: usize,
    pub test_errors: usize,
}

fn e2e_config() -> Config {
    let mut c = Config {
        seed: 2024,
        ..Config::default()
    };
    c.detection.unigram_threshold_by_length = [(1, 0)].into_iter().collect();
    c.detection.context_threshold = 1;
    c.detection.window_order = 5;
    c.ranker.top_k = TOP_K;
    c
}

fn count_correct_tokens(run: &GroundTruthRun, resources: &Resources) -> usize {
    let mut in_error = vec![false; run.ocr_tokens.len()];
    for t in &run.truth {
        for i in t.tokens.clone() {
            in_error[i] = true;
        }
    }
    run.ocr_tokens
        .iter()
        .zip(&in_error)
        .filter(|(t, &e)| !e && t.kind == TokenKind::Word && !t.filtered && resources.evaluated(t))
        .count()
}

fn build() -> Result<EndToEnd, String> {
    let err = |e: ocrpost_core::Error| e.to_string();
    let config = e2e_config();
    let rules = TokenizerRules::default();
    let vocab = vocabulary(1500, 7);
    let clean = markov_text(&vocab, 50_000, 8, 8);
    let clean_tokens: Vec<String> = tokenize(&clean, &rules).into_iter().map(|t| t.surface).collect();
    let unigrams = NgramIndex::from_token_streams(1, [clean_tokens.as_slice()]).map_err(err)?;
    let contexts = NgramIndex::from_token_streams(5, [clean_tokens.as_slice()]).map_err(err)?;

    let words = clean_tokens.iter().filter(|t| t.chars().any(char::is_alphabetic)).count();
    // Two percent of all tokens, drawn from the word tokens.
    let noise = NoiseSpec {
        confusion_rate: 0.02 * clean_tokens.len() as f64 / words as f64,
        split_rate: 0.0,
        merge_rate: 0.0,
        confusions: default_single_char_confusions(),
    };
    let corruption = synth_corrupt(&clean, &noise, 9, &rules).map_err(err)?;
    if corruption.truth.iter().any(|t| t.levenshtein_distance != 1) {
        return Err("synthetic errors are not all single-character confusions".into());
    }

    let lexicon = Lexicon::from_terms("english", vocab.iter().map(String::as_str));
    let resources = Resources::from_parts(&config, unigrams, contexts, lexicon, Vec::new(), HashSet::new());
    let ocr_tokens = resources.tokens(&corruption.text);
    let run = GroundTruthRun::with_truth(&resources, ocr_tokens, corruption.truth.clone()).map_err(err)?;
    let (train, test) = run.split(config.ranker.train_fraction, config.seed);
    let data = pipeline::training_set(&resources, &train, TOP_K).map_err(err)?;
    let trained = pipeline::train_model(&config, &data).map_err(err)?;
    let report = pipeline::evaluate(&resources, &trained.model, &run, &test, TOP_K).map_err(err)?;
    let correct_tokens = count_correct_tokens(&run, &resources);
    let mut fixtures = vec![Fixture {
        name: "closed-vocabulary substitutions",
        run,
        report,
        correct_tokens,
    }];

    // Split/merge-heavy documents, once through alignment and once with
    // the generator's truth list.
    let noisy = NoiseSpec {
        confusion_rate: 0.03,
        split_rate: 0.02,
        merge_rate: 0.02,
        confusions: default_single_char_confusions(),
    };
    let doc = markov_text(&vocab, 5_000, 8, 10);
    let c = synth_corrupt(&doc, &noisy, 11, &rules).map_err(err)?;
    for (name, aligned) in [("split/merge via alignment", true), ("split/merge via generator truth", false)] {
        let run = if aligned {
            GroundTruthRun::new(&resources, &c.text, &doc).map_err(err)?
        } else {
            GroundTruthRun::with_truth(&resources, resources.tokens(&c.text), c.truth.clone()).map_err(err)?
        };
        let report = pipeline::evaluate(&resources, &trained.model, &run, &run.errors, TOP_K).map_err(err)?;
        let correct_tokens = count_correct_tokens(&run, &resources);
        fixtures.push(Fixture {
            name,
            run,
            report,
            correct_tokens,
        });
    }

    Ok(EndToEnd {
        fixtures,
        corrupted: corruption.truth.len(),
        tokens: clean_tokens.len(),
        train_errors: train.len(),
        test_errors: test.len(),
    })
}

pub fn shared() -> &'static Result<EndToEnd, String> {
    static CELL: OnceLock<Result<EndToEnd, String>> = OnceLock::new();
    CELL.get_or_init(build)
}

fn row<'a>(report: &'a MetricsReport, group: &str) -> &'a ocrpost_core::evaluation::PrecisionRow {
    report.precision.iter().find(|r| r.group == group).expect("group present")
}

fn p_at(report: &MetricsReport, group: &str, n: usize) -> f64 {
    row(report, group).precision.iter().find(|p| p.0 == n).map_or(f64::NAN, |p| p.1)
}

pub fn synthetic_pipeline() -> Result<String, String> {
    let e2e = shared().as_ref().map_err(Clone::clone)?;
    let f = &e2e.fixtures[0];
    let recall = f.report.recall.total;
    let p10 = p_at(&f.report, "true_positive", 10);
    let detail = format!(
        "{} tokens, {} corrupted ({} train / {} test errors); detection recall {recall:.4}; \
         held-out P@1 {:.4}, P@10 {p10:.4} on true positives (total group P@10 {:.4}, n={})",
        e2e.tokens,
        e2e.corrupted,
        e2e.train_errors,
        e2e.test_errors,
        p_at(&f.report, "true_positive", 1),
        p_at(&f.report, "total", 10),
        row(&f.report, "total").errors,
    );
    if recall >= 0.95 && p10 >= 0.90 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn metric_identities() -> Result<String, String> {
    let e2e = shared().as_ref().map_err(Clone::clone)?;
    let mut problems = Vec::new();
    for f in &e2e.fixtures {
        let r = &f.report;
        let counts = &r.outcome_counts;
        let (b, u, fp, missed) = (
            counts[&Category::Bounded],
            counts[&Category::Unbounded],
            counts[&Category::FalsePositive],
            counts[&Category::Missed],
        );
        let c = &r.confusion;
        if c.detected() != b + u + fp {
            problems.push(format!("{}: detected column {} != {b}+{u}+{fp}", f.name, c.detected()));
        }
        if c.error_detected + c.error_not_detected != f.run.truth.len() || missed != c.error_not_detected {
            problems.push(format!("{}: error row does not sum to the truth count", f.name));
        }
        if c.total() != f.run.truth.len() + f.correct_tokens {
            problems.push(format!(
                "{}: confusion total {} != {} truth errors + {} correct tokens",
                f.name,
                c.total(),
                f.run.truth.len(),
                f.correct_tokens
            ));
        }
        // Partition: each detection and each truth error exactly once.
        let mut seen = vec![0usize; f.run.detections.len()];
        for o in &f.run.outcomes {
            for &d in &o.detections {
                seen[d] += 1;
            }
        }
        if seen.iter().any(|&s| s != 1) {
            problems.push(format!("{}: a detection is unassigned or assigned twice", f.name));
        }
        let truths: Vec<_> = f.run.outcomes.iter().filter_map(|o| o.ground_truth.as_ref()).collect();
        if truths.len() != f.run.truth.len() || truths.iter().zip(&f.run.truth).any(|(a, b)| *a != b) {
            problems.push(format!("{}: truth errors not partitioned", f.name));
        }
        for p in &r.precision {
            if p.precision.windows(2).any(|w| w[1].1 < w[0].1) {
                problems.push(format!("{}: P@n decreases for {}", f.name, p.group));
            }
            if p.precision.iter().any(|&(_, v)| !(0.0..=1.0).contains(&v)) {
                problems.push(format!("{}: P@n out of range for {}", f.name, p.group));
            }
            let cov = r.coverage.iter().find(|c| c.group == p.group).expect("same groups");
            if p.precision.iter().any(|&(n, v)| n <= TOP_K && v > cov.rate_among_all + 1e-12) {
                problems.push(format!("{}: P@n exceeds pool coverage for {}", f.name, p.group));
            }
        }
        let rec = &r.recall;
        if [rec.total, rec.bounded, rec.unbounded].iter().any(|v| !(0.0..=1.0).contains(v)) {
            problems.push(format!("{}: recall out of range", f.name));
        }
    }
    if !problems.is_empty() {
        return Err(problems.join("; "));
    }
    let sizes: Vec<String> = e2e
        .fixtures
        .iter()
        .map(|f| format!("{} ({} truth errors, {} detections)", f.name, f.run.truth.len(), f.run.detections.len()))
        .collect();
    Ok(format!("identities hold on {}", sizes.join(", ")))
}

fn write_counts(path: &Path, index: &NgramIndex) -> std::io::Result<()> {
    let mut lines: Vec<String> = index.iter().map(|(g, c)| format!("{}\t{c}", g.join(" "))).collect();
    lines.sort();
    let mut out = lines.join("\n");
    out.push('\n');
    std::fs::write(path, out)
}

fn ocrpost(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ocrpost"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "ocrpost {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(())
}

pub fn reproducibility() -> Result<String, String> {
    let io = |e: std::io::Error| e.to_string();
    let dir = tempfile::tempdir().map_err(io)?;
    let d = dir.path();
    let rules = TokenizerRules::default();
    let vocab = vocabulary(400, 21);
    let clean = markov_text(&vocab, 8_000, 22, 22);
    let tokens: Vec<String> = tokenize(&clean, &rules).into_iter().map(|t| t.surface).collect();
    let uni = NgramIndex::from_token_streams(1, [tokens.as_slice()]).map_err(|e| e.to_string())?;
    let five = NgramIndex::from_token_streams(5, [tokens.as_slice()]).map_err(|e| e.to_string())?;
    write_counts(&d.join("1gm.txt"), &uni).map_err(io)?;
    write_counts(&d.join("5gm.txt"), &five).map_err(io)?;
    let noise = NoiseSpec {
        confusion_rate: 0.04,
        split_rate: 0.005,
        merge_rate: 0.005,
        confusions: default_single_char_confusions(),
    };
    let c = synth_corrupt(&clean, &noise, 23, &rules).map_err(|e| e.to_string())?;
    std::fs::write(d.join("truth.txt"), &clean).map_err(io)?;
    std::fs::write(d.join("ocr.txt"), &c.text).map_err(io)?;
    let mut cfg = String::new();
    let _ = writeln!(cfg, "seed = 5\n[paths]\nunigram_files = [\"1gm.txt\"]\nngram_files = [\"5gm.txt\"]");
    let _ = writeln!(cfg, "[detection]\nwindow_order = 5\ncontext_threshold = 1\nunigram_threshold_by_length = {{ 1 = 0 }}");
    let _ = writeln!(cfg, "[ranker]\nn_stages = 30\ncv_folds = 3\ngrid = [{{ n_stages = 10, max_depth = 2 }}, {{ n_stages = 20, max_depth = 3 }}]");
    std::fs::write(d.join("run.toml"), cfg).map_err(io)?;

    let mut outputs = Vec::new();
    for r in ["a", "b"] {
        std::fs::create_dir(d.join(r)).map_err(io)?;
        let model = format!("{r}/model.json");
        let report = format!("{r}/report.tsv");
        let text = format!("{r}/report.txt");
        let base = ["--config", "run.toml", "--model", model.as_str()];
        let truth = ["--ocr", "ocr.txt", "--truth", "truth.txt"];
        ocrpost(d, &[&base[..], &["train"], &truth[..]].concat())?;
        ocrpost(d, &[&base[..], &["evaluate", "--output", report.as_str()], &truth[..]].concat())?;
        ocrpost(
            d,
            &[&base[..], &["evaluate", "--format", "text", "--output", text.as_str()], &truth[..]].concat(),
        )?;
        let read = |p: &str| std::fs::read(d.join(p)).map_err(io);
        outputs.push((read(&model)?, read(&report)?, read(&text)?));
    }
    let (a, b) = (&outputs[0], &outputs[1]);
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2];
    let detail = format!(
        "model {} bytes, TSV report {} bytes, text report {} bytes; identical: model {}, tsv {}, text {}",
        a.0.len(),
        a.1.len(),
        a.2.len(),
        same[0],
        same[1],
        same[2]
    );
    if same.iter().all(|&s| s) && !a.0.is_empty() && !a.1.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}
