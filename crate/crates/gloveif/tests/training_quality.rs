//! Statistical quality gates for the trained embeddings. Both checks run the
//! full training loop over many rng seeds on generated corpora, so they are
//! slower than unit tests but deterministic end to end.

use gloveif::chv::SeedAssignment;
use gloveif::cooccur::{build_matrix, BoostPolicy};
use gloveif::embeddings::WordVectors;
use gloveif::enrich::{run_gloveif, FeedbackConfig};
use gloveif::preprocess::Document;
use gloveif::simindex::SimilarityIndex;
use gloveif::synth::{generate, preset_pair_benchmark, SynthConfig, SynthCorpus};
use gloveif::trainer::{train, HyperParams};
use gloveif::vocab::Vocabulary;

fn docs_of(corpus: &SynthCorpus) -> Vec<Document> {
    corpus
        .lines
        .iter()
        .enumerate()
        .map(|(id, line)| Document {
            id,
            tokens: line.split_whitespace().map(str::to_string).collect(),
        })
        .collect()
}

fn rank_of(index: &SimilarityIndex, query: &str, target: &str) -> usize {
    let n = index.vectors().len();
    index
        .top_similar(query, n, &[])
        .unwrap()
        .iter()
        .position(|nb| nb.token == target)
        .map(|p| p + 1)
        .unwrap_or(n + 1)
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Two tokens planted with identical context distributions end up close: the
/// partner lands in the seed's top three for at least 8 of 10 training seeds.
#[test]
fn planted_twins_rank_in_top_three_across_seeds() {
    let config = SynthConfig {
        pairs: 2,
        contexts_per_pair: 2,
        pair_docs_per_pair: 150,
        pair_doc_contexts: 12,
        background_vocab: 150,
        background_docs: 800,
        background_doc_len: 30,
        coverage_passes: 0,
        rng_seed: 5,
    };
    let corpus = generate(&config).unwrap();
    let documents = docs_of(&corpus);
    let vocabulary = Vocabulary::build(&documents, 5).unwrap();
    let matrix = build_matrix(&documents, &vocabulary, 10).unwrap();
    let pair = &corpus.pairs[0];

    let mut hits = 0;
    let mut ranks = Vec::new();
    for rng_seed in 0..10u64 {
        let hp = HyperParams {
            dim: 30,
            epochs: 10,
            ..HyperParams::with_seed(rng_seed)
        };
        let (model, _) = train(&matrix, &hp).unwrap();
        let vectors = WordVectors::from_model(&model, &vocabulary);
        let index = SimilarityIndex::new(&vectors);
        let rank = rank_of(&index, &pair.member_a, &pair.member_b);
        ranks.push(rank);
        if rank <= 3 {
            hits += 1;
        }
    }
    assert!(hits >= 8, "partner in top-3 for only {hits}/10 seeds: {ranks:?}");
}

/// Feedback with a strong boost never worsens the median partner rank over
/// ten training seeds on the planted-pair benchmark.
#[test]
fn feedback_median_rank_not_worse_over_ten_seeds() {
    let corpus = generate(&preset_pair_benchmark(1)).unwrap();
    let documents = docs_of(&corpus);
    let vocabulary = Vocabulary::build(&documents, 5).unwrap();
    let matrix = build_matrix(&documents, &vocabulary, 10).unwrap();
    let seeds: Vec<SeedAssignment> = corpus
        .pairs
        .iter()
        .map(|p| SeedAssignment {
            cui: p.cui.clone(),
            seed: p.member_a.clone(),
            targets: vec![p.member_b.clone()],
        })
        .collect();

    let mut plain_ranks = Vec::new();
    let mut feedback_ranks = Vec::new();
    for rng_seed in 0..10u64 {
        let hp = HyperParams {
            dim: 50,
            epochs: 15,
            ..HyperParams::with_seed(rng_seed)
        };
        let (model, _) = train(&matrix, &hp).unwrap();
        let vectors = WordVectors::from_model(&model, &vocabulary);
        let index = SimilarityIndex::new(&vectors);
        plain_ranks.extend(
            corpus
                .pairs
                .iter()
                .map(|p| rank_of(&index, &p.member_a, &p.member_b) as f64),
        );

        let fc = FeedbackConfig {
            policy: BoostPolicy::RowMeanScaled(2.0),
            ..FeedbackConfig::default()
        };
        let outcome = run_gloveif(&matrix, &vocabulary, &seeds, &hp, &fc).unwrap();
        let vectors = WordVectors::from_model(&outcome.model, &vocabulary);
        let index = SimilarityIndex::new(&vectors);
        feedback_ranks.extend(
            corpus
                .pairs
                .iter()
                .map(|p| rank_of(&index, &p.member_a, &p.member_b) as f64),
        );
    }

    let plain = median(plain_ranks);
    let feedback = median(feedback_ranks);
    assert!(
        feedback <= plain,
        "pooled median rank with feedback {feedback} vs plain {plain}"
    );
}
