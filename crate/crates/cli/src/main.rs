//! `ocrpost`: detect and correct OCR errors from the command line.
//!
//! Data goes to stdout (or `--output`), diagnostics to stderr.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use ocrpost_core::config::Config;
use ocrpost_core::evaluation::{
    coverage_from_scored, coverage_tsv, default_single_char_confusions, distinctiveness_from_scored,
    distinctiveness_tsv, synth_corrupt, CategorizedError, NoiseSpec,
};
use ocrpost_core::feature_scoring::SimilarityNormalization;
use ocrpost_core::ngram_index::NgramIndex;
use ocrpost_core::pipeline::{self, cache_path, read_text, GroundTruthRun, Resources};
use ocrpost_core::ranker::{self, Candidate, LabeledError, RankingModel, TrainingSet};

#[derive(Parser)]
#[command(name = "ocrpost", version, about = "OCR post-processing: detect, suggest and correct OCR errors")]
struct Cli {
    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// More log output on stderr (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

/// Flags that override configuration values.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum edit distance for candidate search.
    #[arg(long, global = true)]
    delta: Option<usize>,
    /// N-gram order of the context windows.
    #[arg(long, global = true)]
    window_order: Option<usize>,
    #[arg(long, global = true)]
    context_threshold: Option<u64>,
    /// One unigram threshold for every word length.
    #[arg(long, global = true)]
    unigram_threshold: Option<u64>,
    /// Unigram count file(s).
    #[arg(long = "unigrams", global = true)]
    unigrams: Vec<PathBuf>,
    /// N-gram count file(s) of the window order.
    #[arg(long = "ngrams", global = true)]
    ngrams: Vec<PathBuf>,
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Per-feature candidate pool size.
    #[arg(long, global = true)]
    top_k: Option<usize>,
    #[arg(long, value_enum, global = true)]
    similarity_normalization: Option<Normalization>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Normalization {
    SumOfLengths,
    ProductOfLengths,
}

#[derive(Subcommand)]
enum Command {
    /// Build binary caches for the configured n-gram files.
    BuildIndex,
    /// List suspected errors: start, end, surface, unigram count, best context count.
    Detect { input: PathBuf },
    /// Detected errors with every candidate and its feature scores.
    Suggest { input: PathBuf },
    /// Detected errors with their ranked candidate pools.
    Rank { input: PathBuf },
    /// Replace each detected error with its top-ranked candidate.
    Correct {
        input: PathBuf,
        /// Write the corrected text here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write a TSV of ranked suggestions per error.
        #[arg(long)]
        suggestions: Option<PathBuf>,
        /// Suggestions listed per error.
        #[arg(long, default_value_t = 10)]
        show: usize,
    },
    /// Train a ranking model from ground truth or a feature-row TSV.
    Train {
        #[command(flatten)]
        truth: TruthArgs,
        /// Labeled feature rows instead of ground truth.
        #[arg(long, conflicts_with_all = ["ocr", "truth"])]
        rows: Option<PathBuf>,
        /// Also write the generated training rows.
        #[arg(long)]
        rows_out: Option<PathBuf>,
        /// Cross-validation folds for the hyperparameter grid.
        #[arg(long)]
        cv: Option<usize>,
        /// Train on every error instead of the training split.
        #[arg(long)]
        all: bool,
    },
    /// Detection and correction metrics against ground truth.
    Evaluate {
        #[command(flatten)]
        truth: TruthArgs,
        #[arg(long, value_enum, default_value = "tsv")]
        format: ReportFormat,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Evaluate corrections on every error instead of the held-out split.
        #[arg(long)]
        all: bool,
    },
    /// Candidate coverage and per-feature distinctiveness tables.
    AnalyzeFeatures {
        #[command(flatten)]
        truth: TruthArgs,
        /// Write the distinctiveness table here instead of after the coverage table.
        #[arg(long)]
        distinctiveness: Option<PathBuf>,
    },
    /// Inject synthetic OCR noise into clean text.
    Corrupt {
        input: PathBuf,
        /// Chance of a character confusion per word.
        #[arg(long, default_value_t = 0.02)]
        rate: f64,
        #[arg(long, default_value_t = 0.0)]
        split_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        merge_rate: f64,
        /// Write the list of injected errors as TSV.
        #[arg(long)]
        truth_out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct TruthArgs {
    /// OCR text.
    #[arg(long)]
    ocr: Option<PathBuf>,
    /// Ground-truth text aligned with the OCR text.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Tsv,
    Text,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: Option<&Path>, o: &Overrides) -> Result<Config> {
    let mut c = match path {
        Some(p) => Config::read(p)?,
        None => Config::default(),
    };
    if let Some(v) = o.seed {
        c.seed = v;
    }
    if let Some(v) = o.delta {
        c.scoring.delta = v;
    }
    if let Some(v) = o.window_order {
        c.detection.window_order = v;
    }
    if let Some(v) = o.context_threshold {
        c.detection.context_threshold = v;
    }
    if let Some(v) = o.unigram_threshold {
        c.detection.unigram_threshold_by_length = BTreeMap::from([(1, v)]);
    }
    if !o.unigrams.is_empty() {
        c.paths.unigram_files = o.unigrams.clone();
    }
    if !o.ngrams.is_empty() {
        c.paths.ngram_files = o.ngrams.clone();
    }
    if let Some(v) = &o.lexicon {
        c.paths.lexicon = Some(v.clone());
    }
    if let Some(v) = &o.model {
        c.paths.model = Some(v.clone());
    }
    if let Some(v) = o.top_k {
        c.ranker.top_k = v;
    }
    if let Some(v) = o.similarity_normalization {
        c.scoring.similarity_normalization = match v {
            Normalization::SumOfLengths => SimilarityNormalization::SumOfLengths,
            Normalization::ProductOfLengths => SimilarityNormalization::ProductOfLengths,
        };
    }
    c.validate()?;
    Ok(c)
}

fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(content.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn model_path(config: &Config) -> Result<&Path> {
    config
        .paths
        .model
        .as_deref()
        .context("no model path: set paths.model or pass --model")
}

fn load_model(config: &Config) -> Result<RankingModel> {
    let path = model_path(config)?;
    RankingModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn ground_truth(resources: &Resources, args: &TruthArgs) -> Result<GroundTruthRun> {
    let (Some(ocr), Some(truth)) = (&args.ocr, &args.truth) else {
        bail!("both --ocr and --truth are required");
    };
    let ocr_text = read_text(ocr).with_context(|| format!("reading {}", ocr.display()))?;
    let truth_text = read_text(truth).with_context(|| format!("reading {}", truth.display()))?;
    let run = GroundTruthRun::new(resources, &ocr_text, &truth_text)?;
    info!(
        "{} truth errors, {} detections, {} labeled errors",
        run.truth.len(),
        run.detections.len(),
        run.errors.len()
    );
    Ok(run)
}

fn held_out(run: &GroundTruthRun, config: &Config, all: bool) -> (Vec<CategorizedError>, Vec<CategorizedError>) {
    if all {
        (run.errors.clone(), run.errors.clone())
    } else {
        run.split(config.ranker.train_fraction, config.seed)
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(cli.config.as_deref(), &cli.overrides)?;
    match cli.command {
        Command::BuildIndex => build_index(&config),
        Command::Detect { input } => {
            let resources = Resources::load(&config)?;
            let text = read_text(&input)?;
            let tokens = resources.tokens(&text);
            let mut out = String::new();
            for e in resources.detect(&tokens)? {
                let span = e.token.span;
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    span.start,
                    span.end,
                    e.surface(),
                    e.unigram_freq,
                    e.best_context_freq
                );
            }
            emit(None, &out)
        }
        Command::Suggest { input } => {
            let resources = Resources::load(&config)?;
            let text = read_text(&input)?;
            let tokens = resources.tokens(&text);
            let errors = resources.detect(&tokens)?;
            let mut out = String::from("start\tend\terror\tcandidate");
            for name in resources.scoring.feature_names() {
                let _ = write!(out, "\t{name}");
            }
            out.push('\n');
            for s in pipeline::suggest(&resources, &errors)? {
                let span = s.error.token.span;
                for c in &s.candidates {
                    let _ = write!(out, "{}\t{}\t{}\t{}", span.start, span.end, s.error.surface(), c.surface);
                    for v in &c.features {
                        let _ = write!(out, "\t{v}");
                    }
                    out.push('\n');
                }
            }
            emit(None, &out)
        }
        Command::Rank { input } => {
            let resources = Resources::load(&config)?;
            let model = load_model(&config)?;
            let text = read_text(&input)?;
            let correction = pipeline::correct(&resources, &model, &text, config.ranker.top_k)?;
            emit(None, &suggestions_tsv(&correction.errors, usize::MAX))
        }
        Command::Correct {
            input,
            output,
            suggestions,
            show,
        } => {
            let resources = Resources::load(&config)?;
            let model = load_model(&config)?;
            let text = read_text(&input)?;
            let correction = pipeline::correct(&resources, &model, &text, config.ranker.top_k)?;
            info!("{} errors corrected", correction.errors.len());
            emit(output.as_deref(), &correction.text)?;
            if let Some(p) = suggestions {
                emit(Some(&p), &suggestions_tsv(&correction.errors, show))?;
            }
            Ok(())
        }
        Command::Train {
            truth,
            rows,
            rows_out,
            cv,
            all,
        } => {
            let mut config = config;
            if let Some(folds) = cv {
                config.ranker.cv_folds = folds;
            }
            let data = match rows {
                Some(path) => TrainingSet::read_tsv(&path)?,
                None => {
                    let resources = Resources::load(&config)?;
                    let run = ground_truth(&resources, &truth)?;
                    let (train, _) = held_out(&run, &config, all);
                    pipeline::training_set(&resources, &train, config.ranker.top_k)?
                }
            };
            info!(
                "{} training rows ({} positive, {} negative), {} errors dropped",
                data.rows.len(),
                data.positives,
                data.negatives,
                data.dropped_errors
            );
            if let Some(p) = rows_out {
                let mut buf = Vec::new();
                data.write_tsv(&mut buf)?;
                fs::write(&p, buf).with_context(|| format!("writing {}", p.display()))?;
            }
            let outcome = pipeline::train_model(&config, &data)?;
            if let Some(cv) = &outcome.cv {
                for r in &cv.results {
                    eprintln!(
                        "cv stages={} depth={} mean P@1={:.4}",
                        r.hyperparameters.n_stages, r.hyperparameters.max_depth, r.mean_precision_at_1
                    );
                }
            }
            let path = model_path(&config)?;
            outcome.model.save(path)?;
            eprintln!(
                "model written to {} ({} stages, stop: {:?})",
                path.display(),
                outcome.model.stages.len(),
                outcome.report.stop
            );
            Ok(())
        }
        Command::Evaluate {
            truth,
            format,
            output,
            all,
        } => {
            let resources = Resources::load(&config)?;
            let model = load_model(&config)?;
            let run = ground_truth(&resources, &truth)?;
            let (_, test) = held_out(&run, &config, all);
            let report = pipeline::evaluate(&resources, &model, &run, &test, config.ranker.top_k)?;
            let body = match format {
                ReportFormat::Tsv => report.to_tsv(),
                ReportFormat::Text => report.to_text(),
            };
            emit(output.as_deref(), &body)
        }
        Command::AnalyzeFeatures { truth, distinctiveness } => {
            let resources = Resources::load(&config)?;
            let run = ground_truth(&resources, &truth)?;
            let top_k = config.ranker.top_k;
            let labeled: Vec<LabeledError> = run.errors.iter().map(|e| e.labeled.clone()).collect();
            let categories: Vec<_> = run.errors.iter().map(|e| e.category).collect();
            let scored = ranker::score_errors(&labeled, &resources.scoring, top_k)?;
            let coverage = coverage_tsv(&coverage_from_scored(&scored, &categories, config.scoring.delta));
            let table = distinctiveness_tsv(&distinctiveness_from_scored(
                &scored,
                &resources.scoring.feature_names(),
                top_k,
            ));
            match distinctiveness {
                Some(p) => {
                    emit(Some(&p), &table)?;
                    emit(None, &coverage)
                }
                None => emit(None, &format!("{coverage}\n{table}")),
            }
        }
        Command::Corrupt {
            input,
            rate,
            split_rate,
            merge_rate,
            truth_out,
        } => {
            let clean = read_text(&input)?;
            let noise = NoiseSpec {
                confusion_rate: rate,
                split_rate,
                merge_rate,
                confusions: default_single_char_confusions(),
            };
            let c = synth_corrupt(&clean, &noise, config.seed, &config.tokenizer)?;
            if let Some(p) = truth_out {
                let mut tsv = String::from("start\tend\tkind\tintended\tobserved\n");
                for e in &c.edits {
                    let kind = format!("{:?}", e.kind).to_lowercase();
                    let _ = writeln!(
                        tsv,
                        "{}\t{}\t{kind}\t{}\t{}",
                        e.corrupted_span.start, e.corrupted_span.end, e.original, e.corrupted
                    );
                }
                emit(Some(&p), &tsv)?;
            }
            emit(None, &c.text)
        }
    }
}

fn suggestions_tsv(errors: &[pipeline::CorrectedError], show: usize) -> String {
    let mut out = String::from("start\tend\terror\trank\tcandidate\tconfidence\n");
    for e in errors {
        let span = e.error.token.span;
        for (i, c) in e.ranked.iter().take(show).enumerate() {
            let Candidate { surface, confidence, .. } = c;
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{surface}\t{}",
                span.start,
                span.end,
                e.error.surface(),
                i + 1,
                confidence.unwrap_or(f64::NAN)
            );
        }
    }
    out
}

fn build_index(config: &Config) -> Result<()> {
    let paths = &config.paths;
    let jobs = [
        ("unigram", &paths.unigram_files, 1),
        ("ngram", &paths.ngram_files, config.detection.window_order),
    ];
    if jobs.iter().all(|(_, files, _)| files.is_empty()) {
        bail!("no n-gram files configured");
    }
    if let Some(dir) = &paths.cache_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut out = String::from("kind\torder\tfiles\tentries\tvocabulary\tcache\n");
    let mut seen = HashSet::new();
    for (kind, files, order) in jobs {
        if files.is_empty() || !seen.insert((files.clone(), order)) {
            continue;
        }
        let index = NgramIndex::from_files(files, order)?;
        let cache = cache_path(config, files, order).context("no cache location")?;
        index.write_cache_for(files, &cache)?;
        let _ = writeln!(
            out,
            "{kind}\t{order}\t{}\t{}\t{}\t{}",
            files.len(),
            index.len(),
            index.vocab_size(),
            cache.display()
        );
    }
    emit(None, &out)
}
