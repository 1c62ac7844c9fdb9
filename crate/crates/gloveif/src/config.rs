//! Flat key=value run configuration for the end-to-end pipeline. Parsing
//! collects every problem it finds (unknown keys, bad values, out-of-range
//! settings) and reports them together instead of stopping at the first.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::cooccur::BoostPolicy;
use crate::enrich::FeedbackConfig;
use crate::error::{Error, Result};
use crate::eval::{DenominatorMode, EvalConfig};
use crate::preprocess::CleaningConfig;
use crate::trainer::HyperParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Input and output locations; settable in the file, overridable by CLI
    /// flags, and excluded from the config hash (they vary across machines).
    pub corpus: Option<PathBuf>,
    pub concepts: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
    /// Replaces the bundled stopword lists entirely when set.
    pub stopwords: Option<PathBuf>,
    pub rng_seed: u64,
    pub min_token_length: usize,
    pub stemming: bool,
    pub min_count: u64,
    pub window: u32,
    pub dim: usize,
    pub x_max: f64,
    pub alpha: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub top_n: usize,
    pub top_k: usize,
    pub rounds: usize,
    pub boost: BoostPolicy,
    pub boost_candidate_pairs: bool,
    pub eval_top_n: usize,
    pub denominator: DenominatorMode,
    pub min_term_count: u64,
    pub min_terms: usize,
    pub threads: usize,
}

impl RunConfig {
    /// Defaults for every knob except the seed, which has no sensible default.
    pub fn with_seed(rng_seed: u64) -> Self {
        Self {
            corpus: None,
            concepts: None,
            workdir: None,
            stopwords: None,
            rng_seed,
            min_token_length: 3,
            stemming: true,
            min_count: 5,
            window: 10,
            dim: 100,
            x_max: 100.0,
            alpha: 0.75,
            learning_rate: 0.05,
            epochs: 25,
            top_n: 10,
            top_k: 5,
            rounds: 1,
            boost: BoostPolicy::RowMeanScaled(1.0),
            boost_candidate_pairs: false,
            eval_top_n: 10,
            denominator: DenominatorMode::DetectedOnly,
            min_term_count: 100,
            min_terms: 2,
            threads: 1,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_file_with_overrides(path, &[])
    }

    /// Parse the file with `key=value` overrides taking precedence over any
    /// file line for the same key (the CLI-flag path).
    pub fn from_file_with_overrides(path: &Path, overrides: &[(&str, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut merged = String::new();
        for raw in text.lines() {
            let line = raw.trim();
            let overridden = line
                .split_once('=')
                .is_some_and(|(k, _)| overrides.iter().any(|(ok, _)| *ok == k.trim()));
            if !overridden {
                merged.push_str(raw);
                merged.push('\n');
            }
        }
        for (k, v) in overrides {
            merged.push_str(&format!("{k}={v}\n"));
        }
        Self::from_str_checked(&merged)
    }

    pub fn from_str_checked(text: &str) -> Result<Self> {
        let mut cfg = Self::with_seed(0);
        let mut seed_set = false;
        let mut seen: Vec<String> = Vec::new();
        let mut violations = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                violations.push(format!("line {}: expected key=value, got {line:?}", idx + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                violations.push(format!("line {}: duplicate key {key:?}", idx + 1));
                continue;
            }
            seen.push(key.to_string());
            if let Err(msg) = cfg.set(key, value, &mut seed_set) {
                violations.push(format!("line {}: {msg}", idx + 1));
            }
        }
        if !seed_set {
            violations.push("rng_seed is required and has no default".to_string());
        }
        violations.extend(cfg.violations());
        if violations.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }

    fn set(&mut self, key: &str, value: &str, seed_set: &mut bool) -> std::result::Result<(), String> {
        match key {
            "corpus" => self.corpus = Some(PathBuf::from(value)),
            "concepts" => self.concepts = Some(PathBuf::from(value)),
            "workdir" => self.workdir = Some(PathBuf::from(value)),
            "stopwords" => self.stopwords = Some(PathBuf::from(value)),
            "rng_seed" => {
                self.rng_seed = parse_num(key, value)?;
                *seed_set = true;
            }
            "min_token_length" => self.min_token_length = parse_num(key, value)?,
            "stemming" => self.stemming = parse_bool(key, value)?,
            "min_count" => self.min_count = parse_num(key, value)?,
            "window" => self.window = parse_num(key, value)?,
            "dim" => self.dim = parse_num(key, value)?,
            "x_max" => self.x_max = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "epochs" => self.epochs = parse_num(key, value)?,
            "top_n" => self.top_n = parse_num(key, value)?,
            "top_k" => {
                let signed: i64 = parse_num(key, value)?;
                if signed < 0 {
                    return Err("top_k must satisfy top_k >= 0".to_string());
                }
                self.top_k = signed as usize;
            }
            "rounds" => self.rounds = parse_num(key, value)?,
            "boost" => self.boost = parse_boost(value)?,
            "boost_candidate_pairs" => self.boost_candidate_pairs = parse_bool(key, value)?,
            "eval_top_n" => self.eval_top_n = parse_num(key, value)?,
            "denominator" => self.denominator = parse_denominator(value)?,
            "min_term_count" => self.min_term_count = parse_num(key, value)?,
            "min_terms" => self.min_terms = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Every out-of-range setting, so a bad file is reported in one pass.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.min_token_length < 1 {
            v.push("min_token_length must satisfy min_token_length >= 1".to_string());
        }
        if self.min_count < 1 {
            v.push("min_count must satisfy min_count >= 1".to_string());
        }
        if self.window < 1 {
            v.push("window must satisfy window >= 1".to_string());
        }
        if self.min_term_count < 1 {
            v.push("min_term_count must satisfy min_term_count >= 1".to_string());
        }
        if self.min_terms < 2 {
            v.push("min_terms must satisfy min_terms >= 2".to_string());
        }
        if self.threads < 1 {
            v.push("threads must satisfy threads >= 1".to_string());
        }
        v.extend(self.hyper_params().violations());
        v.extend(self.feedback_config().violations());
        v.extend(self.eval_config().violations());
        v
    }

    pub fn cleaning_config(&self) -> Result<CleaningConfig> {
        match &self.stopwords {
            None => Ok(CleaningConfig::with_default_stopwords(
                self.min_token_length,
                self.stemming,
            )),
            Some(path) => {
                let words = crate::preprocess::load_stopwords(path)?;
                CleaningConfig::new(self.min_token_length, self.stemming, words, Vec::new())
            }
        }
    }

    pub fn hyper_params(&self) -> HyperParams {
        HyperParams {
            dim: self.dim,
            x_max: self.x_max,
            alpha: self.alpha,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            rng_seed: self.rng_seed,
        }
    }

    pub fn feedback_config(&self) -> FeedbackConfig {
        FeedbackConfig {
            top_n: self.top_n,
            top_k: self.top_k,
            rounds: self.rounds,
            policy: self.boost,
            boost_candidate_pairs: self.boost_candidate_pairs,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            top_n: self.eval_top_n,
            denominator_mode: self.denominator,
        }
    }

    /// Sorted key=value rendering; the basis for the config hash.
    pub fn canonical_string(&self) -> String {
        let mut pairs = vec![
            ("alpha", self.alpha.to_string()),
            ("boost", boost_spec(&self.boost)),
            ("boost_candidate_pairs", self.boost_candidate_pairs.to_string()),
            ("denominator", denominator_spec(self.denominator).to_string()),
            ("dim", self.dim.to_string()),
            ("epochs", self.epochs.to_string()),
            ("eval_top_n", self.eval_top_n.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("min_count", self.min_count.to_string()),
            ("min_term_count", self.min_term_count.to_string()),
            ("min_terms", self.min_terms.to_string()),
            ("min_token_length", self.min_token_length.to_string()),
            ("rng_seed", self.rng_seed.to_string()),
            ("rounds", self.rounds.to_string()),
            ("stemming", self.stemming.to_string()),
            ("threads", self.threads.to_string()),
            ("top_k", self.top_k.to_string()),
            ("top_n", self.top_n.to_string()),
            ("window", self.window.to_string()),
            ("x_max", self.x_max.to_string()),
        ];
        pairs.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_string().as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            let _ = write!(hex, "{byte:02x}");
        }
        hex
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("{key}: cannot parse {value:?} ({e})"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("{key}: expected true or false, got {value:?}")),
    }
}

fn parse_denominator(value: &str) -> std::result::Result<DenominatorMode, String> {
    match value {
        "detected_only" => Ok(DenominatorMode::DetectedOnly),
        "all_evaluable" => Ok(DenominatorMode::AllEvaluable),
        _ => Err(format!(
            "denominator: expected detected_only or all_evaluable, got {value:?}"
        )),
    }
}

/// `row-mean:<beta>` scales each seed row's mean nonzero weight by beta;
/// `constant:<c>` adds a fixed amount.
pub fn parse_boost(value: &str) -> std::result::Result<BoostPolicy, String> {
    let Some((kind, amount)) = value.split_once(':') else {
        return Err(format!(
            "boost: expected row-mean:<beta> or constant:<c>, got {value:?}"
        ));
    };
    let amount: f64 = amount
        .parse()
        .map_err(|e| format!("boost: cannot parse amount {amount:?} ({e})"))?;
    match kind {
        "row-mean" => Ok(BoostPolicy::RowMeanScaled(amount)),
        "constant" => Ok(BoostPolicy::Constant(amount)),
        _ => Err(format!("boost: unknown kind {kind:?}")),
    }
}

pub fn boost_spec(policy: &BoostPolicy) -> String {
    match policy {
        BoostPolicy::RowMeanScaled(beta) => format!("row-mean:{beta}"),
        BoostPolicy::Constant(c) => format!("constant:{c}"),
    }
}

pub fn denominator_spec(mode: DenominatorMode) -> &'static str {
    match mode {
        DenominatorMode::DetectedOnly => "detected_only",
        DenominatorMode::AllEvaluable => "all_evaluable",
    }
}
