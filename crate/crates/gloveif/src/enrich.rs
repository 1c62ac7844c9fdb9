//! The feedback loop: train, expand every seed's neighborhood by a two-level
//! similarity lookup, boost the boosted (seed, candidate) cells of a copy of
//! the co-occurrence matrix, retrain, and report each seed's final top-n
//! neighbors as candidate lay terms.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use crate::cooccur::{BoostPlan, BoostPolicy, CooccurrenceMatrix};
use crate::chv::SeedAssignment;
use crate::embeddings::WordVectors;
use crate::error::{Error, Result};
use crate::simindex::SimilarityIndex;
use crate::trainer::{train_with_threads, EmbeddingModel, HyperParams, TrainLog};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackConfig {
    pub top_n: usize,
    pub top_k: usize,
    pub rounds: usize,
    pub policy: BoostPolicy,
    /// Also boost (neighbor, sub-neighbor) cells along the expansion edges,
    /// not just (seed, candidate). Off by default.
    pub boost_candidate_pairs: bool,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            top_n: 10,
            top_k: 5,
            rounds: 1,
            policy: BoostPolicy::RowMeanScaled(1.0),
            boost_candidate_pairs: false,
        }
    }
}

impl FeedbackConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.top_n < 1 {
            v.push("top_n must satisfy top_n >= 1".to_string());
        }
        if self.rounds < 1 {
            v.push("rounds must satisfy rounds >= 1".to_string());
        }
        if self.policy.validate().is_err() {
            v.push("boost increment must be strictly positive".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }
}

/// One candidate term for one seed: its cosine under the final model and the
/// feedback round in which expansion first produced it (rounds+1 when it only
/// shows up in the final report).
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub token: String,
    pub cosine: f64,
    pub round: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    /// Seed token -> ranked candidates. BTreeMap so iteration order is the
    /// export order (seed ascending).
    pub per_seed: BTreeMap<String, Vec<Candidate>>,
}

/// Expansion of one seed: the flattened candidate list plus the neighbor ->
/// sub-neighbor edges it was built from.
struct Expansion {
    ordered: Vec<String>,
    edges: Vec<(String, String)>,
}

fn expand_seed_detailed(
    index: &SimilarityIndex,
    seed: &str,
    n: usize,
    k: usize,
) -> Result<Expansion> {
    let top = index.top_similar(seed, n, &[])?;
    let mut raw: Vec<String> = top.iter().map(|nb| nb.token.clone()).collect();
    let mut edges = Vec::new();
    for nb in &top {
        // Sub-queries run on the raw index; the seed is removed from the
        // combined list afterwards, not from each sub-query.
        for sub in index.top_similar(&nb.token, k, &[])? {
            raw.push(sub.token.clone());
            edges.push((nb.token.clone(), sub.token));
        }
    }
    let mut seen = HashSet::new();
    let ordered = raw
        .into_iter()
        .filter(|t| t != seed && seen.insert(t.clone()))
        .collect();
    Ok(Expansion { ordered, edges })
}

/// Top-n neighbors of the seed followed by each neighbor's top-k neighbors,
/// seed removed and duplicates dropped keeping first occurrence. At most
/// n + n*k tokens.
pub fn expand_seed(
    index: &SimilarityIndex,
    seed: &str,
    n: usize,
    k: usize,
) -> Result<Vec<String>> {
    Ok(expand_seed_detailed(index, seed, n, k)?.ordered)
}

#[derive(Debug)]
pub struct EnrichOutcome {
    pub model: EmbeddingModel,
    pub candidates: CandidateSet,
    /// Log of the final (post-boost) training run.
    pub final_log: TrainLog,
    pub round_logs: Vec<TrainLog>,
    pub boosted_pairs: usize,
}

/// Run the full feedback loop. The input matrix is never mutated; every boost
/// lands on a copy, so the caller's baseline stays comparable.
pub fn run_gloveif(
    matrix: &CooccurrenceMatrix,
    vocabulary: &Vocabulary,
    seeds: &[SeedAssignment],
    hp: &HyperParams,
    fc: &FeedbackConfig,
) -> Result<EnrichOutcome> {
    run_gloveif_with_threads(matrix, vocabulary, seeds, hp, fc, 1)
}

/// Feedback loop with `threads` concurrent updaters per training run; only
/// one thread is bit-reproducible.
pub fn run_gloveif_with_threads(
    matrix: &CooccurrenceMatrix,
    vocabulary: &Vocabulary,
    seeds: &[SeedAssignment],
    hp: &HyperParams,
    fc: &FeedbackConfig,
    threads: usize,
) -> Result<EnrichOutcome> {
    hp.validate()?;
    fc.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidParam {
            what: "seeds".into(),
            why: "at least one seed assignment is required".into(),
        });
    }
    let mut current = matrix.clone();
    let mut first_seen: HashMap<(String, String), usize> = HashMap::new();
    let mut round_logs = Vec::with_capacity(fc.rounds);
    let mut boosted_pairs = 0;
    for round in 1..=fc.rounds {
        let (model, log) = train_with_threads(&current, hp, threads)?;
        round_logs.push(log);
        let vectors = WordVectors::from_model(&model, vocabulary);
        let index = SimilarityIndex::new(&vectors);
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        let mut planned: HashSet<(u32, u32)> = HashSet::new();
        let mut plan_pair = |a: u32, b: u32, pairs: &mut Vec<(u32, u32)>| {
            if a != b && planned.insert((a.min(b), a.max(b))) {
                pairs.push((a, b));
            }
        };
        for sa in seeds {
            let expansion = match expand_seed_detailed(&index, &sa.seed, fc.top_n, fc.top_k) {
                Ok(e) => e,
                Err(Error::UnknownToken(t)) => {
                    log::warn!("seed {t:?} not in vocabulary; skipped");
                    continue;
                }
                Err(Error::ZeroVector(t)) => {
                    log::warn!("seed {t:?} has a zero vector; skipped");
                    continue;
                }
                Err(e) => return Err(e),
            };
            let sid = vocabulary
                .lookup(&sa.seed)
                .expect("expansion succeeded, seed is in vocabulary");
            for cand in &expansion.ordered {
                first_seen
                    .entry((sa.seed.clone(), cand.clone()))
                    .or_insert(round);
                let cid = vocabulary
                    .lookup(cand)
                    .expect("candidates come from the vocabulary");
                plan_pair(sid, cid, &mut pairs);
            }
            if fc.boost_candidate_pairs {
                for (a, b) in &expansion.edges {
                    let (aid, bid) = (
                        vocabulary.lookup(a).expect("edge endpoint in vocabulary"),
                        vocabulary.lookup(b).expect("edge endpoint in vocabulary"),
                    );
                    plan_pair(aid, bid, &mut pairs);
                }
            }
        }
        boosted_pairs += pairs.len();
        let plan = BoostPlan {
            pairs,
            policy: fc.policy,
            rounds_applied: round as u32,
        };
        current = current.apply_boost(&plan)?;
    }

    let (model, final_log) = train_with_threads(&current, hp, threads)?;
    let vectors = WordVectors::from_model(&model, vocabulary);
    let index = SimilarityIndex::new(&vectors);
    let mut per_seed = BTreeMap::new();
    for sa in seeds {
        let neighbors = match index.top_similar(&sa.seed, fc.top_n, &[]) {
            Ok(n) => n,
            Err(Error::UnknownToken(_)) | Err(Error::ZeroVector(_)) => continue,
            Err(e) => return Err(e),
        };
        let candidates: Vec<Candidate> = neighbors
            .into_iter()
            .map(|nb| Candidate {
                round: first_seen
                    .get(&(sa.seed.clone(), nb.token.clone()))
                    .copied()
                    .unwrap_or(fc.rounds + 1),
                token: nb.token,
                cosine: nb.cosine,
            })
            .collect();
        per_seed.insert(sa.seed.clone(), candidates);
    }
    Ok(EnrichOutcome {
        model,
        candidates: CandidateSet { per_seed },
        final_log,
        round_logs,
        boosted_pairs,
    })
}

/// TSV `seed<TAB>rank<TAB>candidate<TAB>cosine` under a `#candidates v1`
/// header, sorted by seed then rank; the artifact handed to human raters.
pub fn export_candidates(candidates: &CandidateSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "#candidates v1").map_err(|e| Error::io(path, e))?;
    for (seed, list) in &candidates.per_seed {
        for (rank, c) in list.iter().enumerate() {
            writeln!(w, "{seed}\t{}\t{}\t{:.6}", rank + 1, c.token, c.cosine)
                .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
