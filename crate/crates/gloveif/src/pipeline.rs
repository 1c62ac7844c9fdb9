//! End-to-end run: preprocess, vocabulary, co-occurrence, ground truth,
//! baseline training and evaluation, feedback enrichment and evaluation,
//! comparison. Every artifact is checksummed into manifest.json; a failed
//! stage still writes the manifest with the failure recorded.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chv::{assign_seeds, filter_ground_truth, load_concepts, write_seeds};
use crate::config::RunConfig;
use crate::cooccur::build_matrix_sharded;
use crate::embeddings::WordVectors;
use crate::enrich::{export_candidates, run_gloveif_with_threads};
use crate::error::{Error, Result};
use crate::eval::{compare_reports, evaluate, write_report, Comparison};
use crate::preprocess::{tokenize_corpus, write_clean_corpus};
use crate::simindex::SimilarityIndex;
use crate::trainer::train_with_threads;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub config_hash: String,
    pub artifacts: Vec<ArtifactRecord>,
    pub timings_ms: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub comparison: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<StageFailure>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn record(name: &str, path: &Path) -> Result<ArtifactRecord> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(ArtifactRecord {
        name: name.to_string(),
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

fn stage<T>(
    name: &'static str,
    timings: &mut BTreeMap<String, u64>,
    f: impl FnOnce() -> Result<T>,
) -> Result<T> {
    log::info!("stage {name}");
    let t0 = Instant::now();
    let out = f().map_err(|e| e.at_stage(name));
    *timings.entry(name.to_string()).or_insert(0) += t0.elapsed().as_millis() as u64;
    out
}

fn push_artifact(
    artifacts: &mut Vec<ArtifactRecord>,
    stage_name: &'static str,
    name: &str,
    path: &Path,
) -> Result<()> {
    artifacts.push(record(name, path).map_err(|e| e.at_stage(stage_name))?);
    Ok(())
}

fn stage_of(e: &Error) -> String {
    match e {
        Error::Stage { stage, .. } => stage.to_string(),
        _ => "run".to_string(),
    }
}

/// Run every stage into `out_dir` and write manifest.json there. On failure
/// the manifest still lands, carrying the artifacts produced so far plus the
/// failing stage, and the error is returned to the caller.
pub fn run_pipeline(
    corpus: &Path,
    concepts: &Path,
    out_dir: &Path,
    config: &RunConfig,
) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut artifacts = Vec::new();
    let mut timings = BTreeMap::new();
    let result = execute(corpus, concepts, out_dir, config, &mut artifacts, &mut timings);
    let (comparison, error) = match &result {
        Ok(c) => (Some(c.clone()), None),
        Err(e) => (
            None,
            Some(StageFailure {
                stage: stage_of(e),
                message: e.to_string(),
            }),
        ),
    };
    let manifest = Manifest {
        format: "manifest/v1".to_string(),
        config_hash: config.config_hash(),
        artifacts,
        timings_ms: timings,
        comparison,
        error,
    };
    write_manifest(&manifest, &out_dir.join("manifest.json"))?;
    result.map(|_| manifest)
}

fn execute(
    corpus: &Path,
    concepts: &Path,
    out_dir: &Path,
    config: &RunConfig,
    artifacts: &mut Vec<ArtifactRecord>,
    timings: &mut BTreeMap<String, u64>,
) -> Result<Comparison> {
    let cleaning = config.cleaning_config().map_err(|e| e.at_stage("preprocess"))?;

    let cleaned_path = out_dir.join("cleaned.txt");
    let docs = stage("preprocess", timings, || {
        let docs = tokenize_corpus(corpus, &cleaning)?;
        write_clean_corpus(&cleaned_path, &docs)?;
        Ok(docs)
    })?;
    push_artifact(artifacts, "preprocess", "cleaned.txt", &cleaned_path)?;

    let vocab_path = out_dir.join("vocab.tsv");
    let vocabulary = stage("vocab", timings, || {
        let v = Vocabulary::build(&docs, config.min_count)?;
        v.write_tsv(&vocab_path)?;
        Ok(v)
    })?;
    push_artifact(artifacts, "vocab", "vocab.tsv", &vocab_path)?;

    let cooccur_path = out_dir.join("cooccur.tsv");
    let matrix = stage("cooccur", timings, || {
        let m = build_matrix_sharded(&docs, &vocabulary, config.window as usize, config.threads)?;
        m.write_tsv(&cooccur_path)?;
        Ok(m)
    })?;
    push_artifact(artifacts, "cooccur", "cooccur.tsv", &cooccur_path)?;

    let seeds_path = out_dir.join("seeds.tsv");
    let seeds = stage("ground-truth", timings, || {
        let loaded = load_concepts(concepts, &cleaning)?;
        let kept =
            filter_ground_truth(&loaded, &vocabulary, config.min_term_count, config.min_terms)?;
        let seeds = assign_seeds(&kept, config.rng_seed)?;
        write_seeds(&seeds_path, &seeds)?;
        Ok(seeds)
    })?;
    push_artifact(artifacts, "ground-truth", "seeds.tsv", &seeds_path)?;

    let hp = config.hyper_params();
    let glove_path = out_dir.join("embeddings_glove.txt");
    let baseline_vectors = stage("train-baseline", timings, || {
        let (model, _) = train_with_threads(&matrix, &hp, config.threads)?;
        let vectors = WordVectors::from_model(&model, &vocabulary);
        vectors.write(&glove_path)?;
        Ok(vectors)
    })?;
    push_artifact(artifacts, "train-baseline", "embeddings_glove.txt", &glove_path)?;

    let report_glove_path = out_dir.join("report_glove.json");
    let baseline_report = stage("eval-baseline", timings, || {
        let index = SimilarityIndex::new(&baseline_vectors);
        let report = evaluate(&index, &seeds, &config.eval_config())?;
        write_report(&report, &report_glove_path)?;
        Ok(report)
    })?;
    push_artifact(artifacts, "eval-baseline", "report_glove.json", &report_glove_path)?;

    let gloveif_path = out_dir.join("embeddings_gloveif.txt");
    let candidates_path = out_dir.join("candidates.tsv");
    let gloveif_vectors = stage("enrich", timings, || {
        let outcome = run_gloveif_with_threads(
            &matrix,
            &vocabulary,
            &seeds,
            &hp,
            &config.feedback_config(),
            config.threads,
        )?;
        let vectors = WordVectors::from_model(&outcome.model, &vocabulary);
        vectors.write(&gloveif_path)?;
        export_candidates(&outcome.candidates, &candidates_path)?;
        Ok(vectors)
    })?;
    push_artifact(artifacts, "enrich", "embeddings_gloveif.txt", &gloveif_path)?;
    push_artifact(artifacts, "enrich", "candidates.tsv", &candidates_path)?;

    let report_gloveif_path = out_dir.join("report_gloveif.json");
    let gloveif_report = stage("eval-gloveif", timings, || {
        let index = SimilarityIndex::new(&gloveif_vectors);
        let report = evaluate(&index, &seeds, &config.eval_config())?;
        write_report(&report, &report_gloveif_path)?;
        Ok(report)
    })?;
    push_artifact(artifacts, "eval-gloveif", "report_gloveif.json", &report_gloveif_path)?;

    stage("compare", timings, || {
        compare_reports(&baseline_report, &gloveif_report)
    })
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if manifest.format != "manifest/v1" {
        return Err(Error::parse(
            path,
            1,
            format!("unsupported manifest format {:?}", manifest.format),
        ));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, preset_small};

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::with_seed(11);
        cfg.dim = 8;
        cfg.epochs = 3;
        cfg.min_term_count = 50;
        cfg
    }

    fn write_inputs(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        let corpus = generate(&preset_small(11)).unwrap();
        let corpus_path = dir.join("corpus.txt");
        let concepts_path = dir.join("concepts.tsv");
        corpus.write_corpus(&corpus_path).unwrap();
        corpus.write_concepts(&concepts_path).unwrap();
        (corpus_path, concepts_path)
    }

    #[test]
    fn full_run_produces_nine_checksummed_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let (corpus_path, concepts_path) = write_inputs(dir.path());
        let out = dir.path().join("out");
        let manifest =
            run_pipeline(&corpus_path, &concepts_path, &out, &small_config()).unwrap();

        let names: Vec<&str> = manifest.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "cleaned.txt",
                "vocab.tsv",
                "cooccur.tsv",
                "seeds.tsv",
                "embeddings_glove.txt",
                "report_glove.json",
                "embeddings_gloveif.txt",
                "candidates.tsv",
                "report_gloveif.json",
            ]
        );
        assert!(manifest.comparison.is_some());
        assert!(manifest.error.is_none());
        for a in &manifest.artifacts {
            let bytes = std::fs::read(&a.path).unwrap();
            assert_eq!(sha256_hex(&bytes), a.sha256, "{}", a.name);
            assert_eq!(bytes.len() as u64, a.bytes);
        }
        let back = read_manifest(&out.join("manifest.json")).unwrap();
        assert_eq!(back.artifacts, manifest.artifacts);
        assert_eq!(back.config_hash, manifest.config_hash);
    }

    #[test]
    fn reruns_reproduce_every_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let (corpus_path, concepts_path) = write_inputs(dir.path());
        let m1 =
            run_pipeline(&corpus_path, &concepts_path, &dir.path().join("a"), &small_config())
                .unwrap();
        let m2 =
            run_pipeline(&corpus_path, &concepts_path, &dir.path().join("b"), &small_config())
                .unwrap();
        let sums = |m: &Manifest| -> Vec<(String, String, u64)> {
            m.artifacts
                .iter()
                .map(|a| (a.name.clone(), a.sha256.clone(), a.bytes))
                .collect()
        };
        assert_eq!(sums(&m1), sums(&m2));
        assert_eq!(m1.config_hash, m2.config_hash);
        assert_eq!(m1.comparison, m2.comparison);
    }

    #[test]
    fn missing_corpus_writes_failure_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let (_, concepts_path) = write_inputs(dir.path());
        let out = dir.path().join("out");
        let err = run_pipeline(&dir.path().join("absent.txt"), &concepts_path, &out, &small_config())
            .unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "preprocess", .. }));
        let manifest = read_manifest(&out.join("manifest.json")).unwrap();
        let failure = manifest.error.unwrap();
        assert_eq!(failure.stage, "preprocess");
        assert!(manifest.artifacts.is_empty());
        assert!(manifest.comparison.is_none());
    }

    #[test]
    fn midway_failure_keeps_earlier_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let (corpus_path, _) = write_inputs(dir.path());
        let bad_concepts = dir.path().join("bad.tsv");
        std::fs::write(&bad_concepts, "not a concept row\n").unwrap();
        let out = dir.path().join("out");
        let err =
            run_pipeline(&corpus_path, &bad_concepts, &out, &small_config()).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "ground-truth", .. }));
        let manifest = read_manifest(&out.join("manifest.json")).unwrap();
        assert_eq!(manifest.error.unwrap().stage, "ground-truth");
        let names: Vec<&str> = manifest.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, vec!["cleaned.txt", "vocab.tsv", "cooccur.tsv"]);
    }
}
