//! Error type shared across the pipeline.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid UTF-8 in {path} at byte offset {offset}")]
    InvalidUtf8 { path: PathBuf, offset: u64 },

    #[error("no tokens survive min_count={min_count}")]
    EmptyVocabulary { min_count: u64 },

    #[error("unknown token: {0}")]
    UnknownToken(String),

    #[error("token {0} has a zero-norm vector")]
    ZeroVector(String),

    #[error("zero-norm vector passed to cosine")]
    ZeroNorm,

    #[error("vector dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("co-occurrence weight must be positive, got {value} for cell ({i}, {j})")]
    NonPositiveWeight { i: u32, j: u32, value: f64 },

    #[error("cell id {id} out of range for vocabulary of {vocab_size}")]
    IdOutOfRange { id: u32, vocab_size: u32 },

    #[error("boost pair ({0}, {0}) is diagonal")]
    DiagonalBoost(u32),

    #[error("boost increment must be strictly positive, got {0}")]
    NonPositiveBoost(f64),

    #[error("co-occurrence matrix is empty")]
    EmptyMatrix,

    #[error("non-finite value at epoch {epoch}, cell index {cell}; lower the learning rate")]
    NonFinite { epoch: usize, cell: usize },

    #[error("window size {0} too large for exact counting")]
    WindowTooLarge(u32),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate CUI {cui} at {path}:{line}")]
    DuplicateCui {
        cui: String,
        path: PathBuf,
        line: usize,
    },

    #[error("no evaluable concepts (check min-term-count / min-terms against the corpus)")]
    NoEvaluableConcepts,

    #[error("concept {cui} has {n} usable terms, need at least 2 for seed assignment")]
    TooFewTerms { cui: String, n: usize },

    #[error("concept has no targets")]
    EmptyTargets,

    #[error("invalid {what}: {why}")]
    InvalidParam { what: String, why: String },

    #[error("invalid config:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 for configuration/validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::InvalidParam { .. } => 1,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
