//! Deterministic synthetic corpora with planted synonym pairs. The two
//! members of a pair are written into disjoint documents that draw from the
//! same per-pair context pool, so they share a context distribution without
//! ever co-occurring directly. Background documents sample a Zipf law.

use std::io::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::CleaningConfig;
use crate::rng::derive_seed;

const CONSONANTS: &[u8] = b"bdfglmnprtvz";
const VOWELS: &[u8] = b"aeiou";

/// Tokens per coverage line (coverage passes enumerate the background
/// vocabulary so every token clears a min-count threshold).
const COVERAGE_LINE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub pairs: usize,
    pub contexts_per_pair: usize,
    pub pair_docs_per_pair: usize,
    /// Context tokens per pair document; the document also holds one member.
    pub pair_doc_contexts: usize,
    pub background_vocab: usize,
    pub background_docs: usize,
    pub background_doc_len: usize,
    /// Extra passes that write the whole background vocabulary verbatim.
    pub coverage_passes: usize,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedPair {
    pub cui: String,
    pub professional_name: String,
    pub member_a: String,
    pub member_b: String,
    pub contexts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub lines: Vec<String>,
    pub pairs: Vec<PlantedPair>,
}

/// Enumerate CVCVC strings in a fixed order and keep the ones the cleaning
/// pipeline maps to themselves, so corpus tokens survive preprocessing
/// unchanged. Errors when the shape cannot supply `n` tokens.
pub fn token_pool(n: usize) -> Result<Vec<String>> {
    let config = CleaningConfig::with_default_stopwords(3, true);
    let mut pool = Vec::with_capacity(n);
    for &c1 in CONSONANTS {
        for &v1 in VOWELS {
            for &c2 in CONSONANTS {
                for &v2 in VOWELS {
                    for &c3 in CONSONANTS {
                        if pool.len() == n {
                            return Ok(pool);
                        }
                        let t = String::from_utf8(vec![c1, v1, c2, v2, c3]).unwrap();
                        if config.clean_token(&t).as_deref() == Some(t.as_str()) {
                            pool.push(t);
                        }
                    }
                }
            }
        }
    }
    if pool.len() < n {
        return Err(Error::InvalidParam {
            what: "synthetic token pool".into(),
            why: format!("needs {n} tokens but the CVCVC shape yields only {}", pool.len()),
        });
    }
    Ok(pool)
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    if config.pairs > 0 && config.contexts_per_pair == 0 {
        return Err(Error::InvalidParam {
            what: "contexts_per_pair".into(),
            why: "must be positive when pairs are planted".into(),
        });
    }
    let needed = config.pairs * (3 + config.contexts_per_pair) + config.background_vocab;
    let pool = token_pool(needed)?;
    let (member_slice, rest) = pool.split_at(config.pairs * 2);
    let (name_slice, rest) = rest.split_at(config.pairs);
    let (context_slice, background) = rest.split_at(config.pairs * config.contexts_per_pair);

    let mut pairs = Vec::with_capacity(config.pairs);
    for p in 0..config.pairs {
        pairs.push(PlantedPair {
            cui: format!("C{:07}", p + 1),
            professional_name: name_slice[p].clone(),
            member_a: member_slice[2 * p].clone(),
            member_b: member_slice[2 * p + 1].clone(),
            contexts: context_slice
                [p * config.contexts_per_pair..(p + 1) * config.contexts_per_pair]
                .to_vec(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, "synth-docs"));
    let mut lines = Vec::new();

    for pair in &pairs {
        for d in 0..config.pair_docs_per_pair {
            let mut doc: Vec<&str> = (0..config.pair_doc_contexts)
                .map(|_| pair.contexts[rng.gen_range(0..pair.contexts.len())].as_str())
                .collect();
            // Alternate members so both get exactly half of the documents.
            let member = if d % 2 == 0 { &pair.member_a } else { &pair.member_b };
            let pos = rng.gen_range(0..=doc.len());
            doc.insert(pos, member);
            lines.push(doc.join(" "));
        }
    }

    if config.background_docs > 0 && !background.is_empty() {
        let weights: Vec<f64> = (0..background.len()).map(|i| 1.0 / (i + 1) as f64).collect();
        let zipf = WeightedIndex::new(&weights).expect("positive weights");
        for _ in 0..config.background_docs {
            let doc: Vec<&str> = (0..config.background_doc_len)
                .map(|_| background[zipf.sample(&mut rng)].as_str())
                .collect();
            lines.push(doc.join(" "));
        }
    }

    for _ in 0..config.coverage_passes {
        for chunk in background.chunks(COVERAGE_LINE) {
            lines.push(chunk.join(" "));
        }
    }

    use rand::seq::SliceRandom;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.rng_seed, "synth-shuffle"));
    lines.shuffle(&mut shuffle_rng);

    Ok(SynthCorpus { lines, pairs })
}

impl SynthCorpus {
    pub fn token_count(&self) -> usize {
        self.lines.iter().map(|l| l.split_whitespace().count()).sum()
    }

    pub fn write_corpus(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        );
        for line in &self.lines {
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        f.flush().map_err(|e| Error::io(path, e))
    }

    /// Ground-truth rows in `CUI<TAB>name<TAB>memberA|memberB` form.
    pub fn concepts_tsv(&self) -> String {
        let mut out = String::from("#concepts v1\n");
        for pair in &self.pairs {
            out.push_str(&format!(
                "{}\t{}\t{}|{}\n",
                pair.cui, pair.professional_name, pair.member_a, pair.member_b
            ));
        }
        out
    }

    pub fn write_concepts(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.concepts_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Quick corpus for unit-scale experiments: ~36k tokens, 6 planted pairs.
pub fn preset_small(rng_seed: u64) -> SynthConfig {
    SynthConfig {
        pairs: 6,
        contexts_per_pair: 6,
        pair_docs_per_pair: 150,
        pair_doc_contexts: 12,
        background_vocab: 150,
        background_docs: 800,
        background_doc_len: 30,
        coverage_passes: 0,
        rng_seed,
    }
}

/// Pair-recovery benchmark: 20 pairs, vocabulary near 500, ~200k tokens.
/// Nine contexts per pair fill a seed's top-10 with its contexts plus the
/// partner exactly, so expansion picks up no stray sub-neighbors.
pub fn preset_pair_benchmark(rng_seed: u64) -> SynthConfig {
    SynthConfig {
        pairs: 20,
        contexts_per_pair: 9,
        pair_docs_per_pair: 250,
        pair_doc_contexts: 12,
        background_vocab: 280,
        background_docs: 2200,
        background_doc_len: 60,
        coverage_passes: 0,
        rng_seed,
    }
}

/// Throughput benchmark: exactly one million tokens over a 10k vocabulary;
/// five coverage passes pin every token's count at five or more.
pub fn preset_perf(rng_seed: u64) -> SynthConfig {
    SynthConfig {
        pairs: 0,
        contexts_per_pair: 0,
        pair_docs_per_pair: 0,
        pair_doc_contexts: 0,
        background_vocab: 10_000,
        background_docs: 9_500,
        background_doc_len: 100,
        coverage_passes: 5,
        rng_seed,
    }
}
