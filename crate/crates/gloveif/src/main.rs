//! Command-line front end. One subcommand per pipeline stage plus `run` for
//! the whole chain and `synth` for benchmark corpora. Exit code 0 on
//! success, 1 on validation errors, 2 on runtime errors.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use gloveif::chv::{assign_seeds, filter_ground_truth, load_concepts, read_seeds, write_seeds};
use gloveif::config::{parse_boost, RunConfig};
use gloveif::cooccur::{build_matrix_sharded, CooccurrenceMatrix};
use gloveif::embeddings::WordVectors;
use gloveif::enrich::{export_candidates, run_gloveif_with_threads, FeedbackConfig};
use gloveif::error::{Error, Result};
use gloveif::eval::{
    compare_reports, evaluate_runs, read_report, write_report, DenominatorMode, EvalConfig,
};
use gloveif::pipeline::run_pipeline;
use gloveif::preprocess::{
    default_medical_stopwords, default_standard_stopwords, load_stopwords, read_clean_corpus,
    tokenize_corpus, write_clean_corpus, CleaningConfig,
};
use gloveif::simindex::SimilarityIndex;
use gloveif::synth;
use gloveif::trainer::{train_with_threads, HyperParams};
use gloveif::vocab::Vocabulary;

#[derive(Parser)]
#[command(name = "gloveif", version, about = "Embedding-based synonym discovery toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Clean a raw corpus into one tokenized document per line.
    Preprocess {
        #[arg(long)]
        corpus: PathBuf,
        /// Replaces the bundled general-English stopword list.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Replaces the bundled domain stopword list.
        #[arg(long)]
        med_stopwords: Option<PathBuf>,
        #[arg(long)]
        no_stem: bool,
        #[arg(long, default_value_t = 3)]
        min_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count tokens in a cleaned corpus and write the ranked vocabulary.
    Vocab {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 5)]
        min_count: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the distance-weighted co-occurrence matrix.
    Cooccur {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = 10)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Filter concepts against the vocabulary and assign seed terms.
    GroundTruth {
        #[arg(long)]
        concepts: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = 100)]
        min_term_count: u64,
        #[arg(long, default_value_t = 2)]
        min_terms: usize,
        #[arg(long)]
        rng_seed: u64,
        #[arg(long)]
        no_stem: bool,
        #[arg(long, default_value_t = 3)]
        min_len: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train embeddings on a co-occurrence matrix.
    Train {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 100.0)]
        x_max: f64,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 25)]
        epochs: usize,
        #[arg(long)]
        rng_seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
        /// Optional JSONL per-epoch training log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print the nearest neighbors of a token.
    Query {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        token: String,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
    },
    /// Expand seeds, boost the matrix, retrain, and export candidates.
    Enrich {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        /// Checked against the matrix header; the matrix fixes the window.
        #[arg(long)]
        window: Option<usize>,
        #[arg(long, default_value_t = 100.0)]
        x_max: f64,
        #[arg(long, default_value_t = 0.75)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        learning_rate: f64,
        #[arg(long, default_value_t = 25)]
        epochs: usize,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, default_value = "row-mean:1.0")]
        boost: String,
        /// Also boost (neighbor, sub-neighbor) cells along expansion edges.
        #[arg(long)]
        boost_candidate_pairs: bool,
        #[arg(long)]
        rng_seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out_candidates: PathBuf,
        #[arg(long)]
        out_embeddings: PathBuf,
    },
    /// Score retrieval against seed assignments and write a report.
    Eval {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_n: usize,
        #[arg(long, default_value = "detected_only")]
        denominator: String,
        /// Re-evaluate with redrawn seeds this many times.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Required when --runs > 1.
        #[arg(long)]
        rng_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two evaluation reports.
    Compare {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        variant: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the `corpus` config key.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Overrides the `concepts` config key.
        #[arg(long)]
        concepts: Option<PathBuf>,
        /// Overrides the `workdir` config key.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Overrides the `rng_seed` config key.
        #[arg(long)]
        rng_seed: Option<u64>,
        /// Overrides the `threads` config key.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate a synthetic benchmark corpus with planted synonym pairs.
    Synth {
        /// One of: small, pair-benchmark, perf.
        #[arg(long)]
        preset: String,
        #[arg(long)]
        rng_seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        concepts_out: Option<PathBuf>,
    },
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(vec![msg.into()])
}

fn cleaning_from_flags(
    min_len: usize,
    no_stem: bool,
    stopwords: &Option<PathBuf>,
    med_stopwords: &Option<PathBuf>,
) -> Result<CleaningConfig> {
    let standard = match stopwords {
        Some(p) => load_stopwords(p)?,
        None => default_standard_stopwords(),
    };
    let medical = match med_stopwords {
        Some(p) => load_stopwords(p)?,
        None => default_medical_stopwords(),
    };
    CleaningConfig::new(min_len, !no_stem, standard, medical)
}

fn parse_denominator_flag(value: &str) -> Result<DenominatorMode> {
    match value {
        "detected_only" => Ok(DenominatorMode::DetectedOnly),
        "all_evaluable" => Ok(DenominatorMode::AllEvaluable),
        _ => Err(invalid(format!(
            "denominator: expected detected_only or all_evaluable, got {value:?}"
        ))),
    }
}

fn read_matrix_and_vocab(matrix: &PathBuf, vocab: &PathBuf) -> Result<(CooccurrenceMatrix, Vocabulary)> {
    let m = CooccurrenceMatrix::read_tsv(matrix)?;
    let v = Vocabulary::read_tsv(vocab)?;
    if v.len() != m.vocab_size() {
        return Err(invalid(format!(
            "vocabulary has {} entries but the matrix header says vocab={}",
            v.len(),
            m.vocab_size()
        )));
    }
    Ok((m, v))
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Preprocess {
            corpus,
            stopwords,
            med_stopwords,
            no_stem,
            min_len,
            out,
        } => {
            let config = cleaning_from_flags(min_len, no_stem, &stopwords, &med_stopwords)?;
            let docs = tokenize_corpus(&corpus, &config)?;
            write_clean_corpus(&out, &docs)?;
            log::info!("wrote {} documents to {}", docs.len(), out.display());
        }
        Cmd::Vocab { corpus, min_count, out } => {
            let docs = read_clean_corpus(&corpus)?;
            let vocabulary = Vocabulary::build(&docs, min_count)?;
            vocabulary.write_tsv(&out)?;
            log::info!("wrote {} tokens to {}", vocabulary.len(), out.display());
        }
        Cmd::Cooccur {
            corpus,
            vocab,
            window,
            threads,
            out,
        } => {
            let docs = read_clean_corpus(&corpus)?;
            let vocabulary = Vocabulary::read_tsv(&vocab)?;
            let matrix = build_matrix_sharded(&docs, &vocabulary, window, threads)?;
            matrix.write_tsv(&out)?;
            log::info!("wrote {} cells to {}", matrix.len(), out.display());
        }
        Cmd::GroundTruth {
            concepts,
            vocab,
            min_term_count,
            min_terms,
            rng_seed,
            no_stem,
            min_len,
            out,
        } => {
            let config = cleaning_from_flags(min_len, no_stem, &None, &None)?;
            let vocabulary = Vocabulary::read_tsv(&vocab)?;
            let loaded = load_concepts(&concepts, &config)?;
            let kept = filter_ground_truth(&loaded, &vocabulary, min_term_count, min_terms)?;
            let seeds = assign_seeds(&kept, rng_seed)?;
            write_seeds(&out, &seeds)?;
            log::info!(
                "kept {} of {} concepts; seeds written to {}",
                kept.len(),
                loaded.len(),
                out.display()
            );
        }
        Cmd::Train {
            matrix,
            vocab,
            dim,
            x_max,
            alpha,
            learning_rate,
            epochs,
            rng_seed,
            threads,
            out,
            log: log_path,
        } => {
            let (m, v) = read_matrix_and_vocab(&matrix, &vocab)?;
            let hp = HyperParams {
                dim,
                x_max,
                alpha,
                learning_rate,
                epochs,
                rng_seed,
            };
            let (model, train_log) = train_with_threads(&m, &hp, threads)?;
            WordVectors::from_model(&model, &v).write(&out)?;
            if let Some(p) = log_path {
                train_log.write_jsonl(&p)?;
            }
            log::info!(
                "J {:.6} -> {:.6} over {} epochs; embeddings at {}",
                train_log.initial_j,
                train_log.final_j,
                hp.epochs,
                out.display()
            );
        }
        Cmd::Query {
            embeddings,
            token,
            top_n,
        } => {
            let vectors = WordVectors::read(&embeddings)?;
            let index = SimilarityIndex::new(&vectors);
            for (rank, nb) in index.top_similar(&token, top_n, &[])?.iter().enumerate() {
                println!("{}\t{}\t{:.6}", rank + 1, nb.token, nb.cosine);
            }
        }
        Cmd::Enrich {
            matrix,
            vocab,
            seeds,
            dim,
            window,
            x_max,
            alpha,
            learning_rate,
            epochs,
            top_n,
            top_k,
            rounds,
            boost,
            boost_candidate_pairs,
            rng_seed,
            threads,
            out_candidates,
            out_embeddings,
        } => {
            let (m, v) = read_matrix_and_vocab(&matrix, &vocab)?;
            if let Some(w) = window {
                if w != m.window_size() {
                    return Err(invalid(format!(
                        "--window {w} does not match the matrix header window={}",
                        m.window_size()
                    )));
                }
            }
            let assignments = read_seeds(&seeds)?;
            let hp = HyperParams {
                dim,
                x_max,
                alpha,
                learning_rate,
                epochs,
                rng_seed,
            };
            let fc = FeedbackConfig {
                top_n,
                top_k,
                rounds,
                policy: parse_boost(&boost).map_err(invalid)?,
                boost_candidate_pairs,
            };
            let outcome = run_gloveif_with_threads(&m, &v, &assignments, &hp, &fc, threads)?;
            WordVectors::from_model(&outcome.model, &v).write(&out_embeddings)?;
            export_candidates(&outcome.candidates, &out_candidates)?;
            log::info!(
                "boosted {} pairs over {} rounds; candidates at {}",
                outcome.boosted_pairs,
                fc.rounds,
                out_candidates.display()
            );
        }
        Cmd::Eval {
            embeddings,
            seeds,
            top_n,
            denominator,
            runs,
            rng_seed,
            out,
        } => {
            let config = EvalConfig {
                top_n,
                denominator_mode: parse_denominator_flag(&denominator)?,
            };
            let seed = match (runs, rng_seed) {
                (r, None) if r > 1 => {
                    return Err(invalid("--rng-seed is required when --runs > 1"))
                }
                (_, s) => s.unwrap_or(0),
            };
            let vectors = WordVectors::read(&embeddings)?;
            let index = SimilarityIndex::new(&vectors);
            let assignments = read_seeds(&seeds)?;
            let report = evaluate_runs(&index, &assignments, &config, runs, seed)?;
            write_report(&report, &out)?;
            let h = &report.headline_display;
            println!(
                "P {:.2} R {:.2} F {:.2} MRR {:.2} ({} of {} concepts detected)",
                h.precision,
                h.recall,
                h.f_score,
                h.mrr,
                report.concepts_detected,
                report.concepts_evaluated
            );
        }
        Cmd::Compare {
            baseline,
            variant,
            out,
        } => {
            let b = read_report(&baseline)?;
            let v = read_report(&variant)?;
            let cmp = compare_reports(&b, &v)?;
            if let Some(p) = out {
                let json = serde_json::to_string_pretty(&cmp).expect("comparison serializes");
                std::fs::write(&p, json + "\n").map_err(|e| Error::io(&p, e))?;
            }
            match cmp.f_relative_improvement_pct {
                Some(pct) => println!(
                    "F {:.2} -> {:.2} ({pct:+.1}%)",
                    b.headline.f_score, v.headline.f_score
                ),
                None => println!(
                    "F {:.2} -> {:.2} (baseline F is zero; relative change undefined)",
                    b.headline.f_score, v.headline.f_score
                ),
            }
        }
        Cmd::Run {
            config,
            corpus,
            concepts,
            out_dir,
            rng_seed,
            threads,
        } => {
            let mut overrides: Vec<(&str, String)> = Vec::new();
            if let Some(p) = &corpus {
                overrides.push(("corpus", p.display().to_string()));
            }
            if let Some(p) = &concepts {
                overrides.push(("concepts", p.display().to_string()));
            }
            if let Some(p) = &out_dir {
                overrides.push(("workdir", p.display().to_string()));
            }
            if let Some(s) = rng_seed {
                overrides.push(("rng_seed", s.to_string()));
            }
            if let Some(t) = threads {
                overrides.push(("threads", t.to_string()));
            }
            let cfg = RunConfig::from_file_with_overrides(&config, &overrides)?;
            let corpus_path = cfg
                .corpus
                .clone()
                .ok_or_else(|| invalid("corpus path required (config key corpus or --corpus)"))?;
            let concepts_path = cfg.concepts.clone().ok_or_else(|| {
                invalid("concepts path required (config key concepts or --concepts)")
            })?;
            let workdir = cfg
                .workdir
                .clone()
                .ok_or_else(|| invalid("workdir required (config key workdir or --out-dir)"))?;
            let manifest = run_pipeline(&corpus_path, &concepts_path, &workdir, &cfg)?;
            let cmp = manifest.comparison.as_ref().expect("successful run compares");
            match cmp.f_relative_improvement_pct {
                Some(pct) => println!(
                    "{} artifacts in {}; F change {pct:+.1}%",
                    manifest.artifacts.len(),
                    workdir.display()
                ),
                None => println!(
                    "{} artifacts in {}; baseline F is zero, relative change undefined",
                    manifest.artifacts.len(),
                    workdir.display()
                ),
            }
        }
        Cmd::Synth {
            preset,
            rng_seed,
            out,
            concepts_out,
        } => {
            let config = match preset.as_str() {
                "small" => synth::preset_small(rng_seed),
                "pair-benchmark" => synth::preset_pair_benchmark(rng_seed),
                "perf" => synth::preset_perf(rng_seed),
                _ => {
                    return Err(invalid(format!(
                        "preset: expected small, pair-benchmark, or perf, got {preset:?}"
                    )))
                }
            };
            let corpus = synth::generate(&config)?;
            corpus.write_corpus(&out)?;
            if let Some(p) = concepts_out {
                corpus.write_concepts(&p)?;
            }
            log::info!(
                "wrote {} lines ({} tokens, {} pairs) to {}",
                corpus.lines.len(),
                corpus.token_count(),
                corpus.pairs.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
