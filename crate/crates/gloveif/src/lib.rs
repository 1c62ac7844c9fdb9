//! Synonym discovery for consumer health text. Trains GloVe-style word
//! embeddings from a cleaned corpus, expands seed terms through two levels of
//! cosine neighbors, feeds the candidates back as co-occurrence boosts, and
//! retrains, so that terms a lay author uses interchangeably with a seed pull
//! closer together. Includes the evaluation harness (precision, recall, F,
//! MRR against concept ground truth), a deterministic synthetic-corpus
//! generator for benchmarks, and an end-to-end pipeline with a checksummed
//! run manifest.

pub mod chv;
pub mod config;
pub mod cooccur;
pub mod embeddings;
pub mod enrich;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod simindex;
pub mod stem;
pub mod synth;
pub mod trainer;
pub mod vocab;

pub use error::{Error, Result};
