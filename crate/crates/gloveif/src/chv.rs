//! Concept ground truth: ingest CUI/term extracts, drop terms that are mere
//! morphological variants of the professional name, keep only concepts with
//! enough corpus-supported lay terms, and pick one seed term per concept.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::CleaningConfig;
use crate::rng::derive_seed;
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Concept {
    pub cui: String,
    pub professional_name: String,
    /// Cleaned single-token lay terms, unique, in file order.
    pub chv_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedAssignment {
    pub cui: String,
    pub seed: String,
    pub targets: Vec<String>,
}

fn valid_cui(cui: &str) -> bool {
    let mut chars = cui.chars();
    chars.next() == Some('C') && {
        let rest = chars.as_str();
        !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
    }
}

/// Load a concepts TSV `CUI<TAB>professional_name<TAB>term1|term2|...`,
/// cleaning every term with the same rules as the corpus so ground truth and
/// corpus share one token space. Multi-word terms split into unigrams.
pub fn load_concepts(path: &Path, config: &CleaningConfig) -> Result<Vec<Concept>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut concepts = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (cui, name, terms) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(n), Some(t), None) => (c, n, t),
            _ => {
                return Err(Error::parse(
                    path,
                    lineno,
                    "expected CUI<TAB>professional_name<TAB>term1|term2|...",
                ))
            }
        };
        if !valid_cui(cui) {
            return Err(Error::parse(
                path,
                lineno,
                format!("CUI {cui:?} does not match C<digits>"),
            ));
        }
        if !seen.insert(cui.to_string()) {
            return Err(Error::DuplicateCui {
                cui: cui.to_string(),
                path: path.to_path_buf(),
                line: lineno,
            });
        }
        let mut chv_terms = Vec::new();
        for term in terms.split('|') {
            for word in term.split_whitespace() {
                if let Some(cleaned) = config.clean_token(word) {
                    if !chv_terms.contains(&cleaned) {
                        chv_terms.push(cleaned);
                    }
                }
            }
        }
        concepts.push(Concept {
            cui: cui.to_string(),
            professional_name: name.to_string(),
            chv_terms,
        });
    }
    Ok(concepts)
}

/// Lowercase, strip every non-alphabetic character, then strip one trailing s.
fn variant_key(word: &str) -> String {
    let mut s: String = word
        .chars()
        .flat_map(|c| c.to_lowercase())
        .filter(|c| c.is_alphabetic())
        .collect();
    if s.len() > 1 && s.ends_with('s') {
        s.pop();
    }
    s
}

/// True when the term differs from some token of the professional name only
/// by case, digits, punctuation, or a plural s. Such terms are not lay
/// synonyms and are excluded from the ground truth.
pub fn is_morphological_variant(chv_term: &str, professional_name: &str) -> bool {
    let key = variant_key(chv_term);
    if key.is_empty() {
        return false;
    }
    professional_name
        .split_whitespace()
        .any(|tok| variant_key(tok) == key)
}

/// Keep concepts with at least `min_terms` terms that are not morphological
/// variants and occur at least `min_term_count` times in the corpus;
/// non-qualifying terms are dropped from survivors.
pub fn filter_ground_truth(
    concepts: &[Concept],
    vocabulary: &Vocabulary,
    min_term_count: u64,
    min_terms: usize,
) -> Result<Vec<Concept>> {
    let mut kept = Vec::new();
    for concept in concepts {
        let qualifying: Vec<String> = concept
            .chv_terms
            .iter()
            .filter(|t| !is_morphological_variant(t, &concept.professional_name))
            .filter(|t| vocabulary.count_of(t).is_some_and(|c| c >= min_term_count))
            .cloned()
            .collect();
        if qualifying.len() >= min_terms {
            kept.push(Concept {
                cui: concept.cui.clone(),
                professional_name: concept.professional_name.clone(),
                chv_terms: qualifying,
            });
        }
    }
    if kept.is_empty() {
        return Err(Error::NoEvaluableConcepts);
    }
    Ok(kept)
}

/// Pick one uniformly random seed term per concept; the remaining terms are
/// the retrieval targets. Deterministic in rng_seed and concept order.
pub fn assign_seeds(concepts: &[Concept], rng_seed: u64) -> Result<Vec<SeedAssignment>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, "seed-assign"));
    let mut out = Vec::with_capacity(concepts.len());
    for concept in concepts {
        if concept.chv_terms.len() < 2 {
            return Err(Error::TooFewTerms {
                cui: concept.cui.clone(),
                n: concept.chv_terms.len(),
            });
        }
        let pick = rng.gen_range(0..concept.chv_terms.len());
        let seed = concept.chv_terms[pick].clone();
        let targets = concept
            .chv_terms
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != pick)
            .map(|(_, t)| t.clone())
            .collect();
        out.push(SeedAssignment {
            cui: concept.cui.clone(),
            seed,
            targets,
        });
    }
    Ok(out)
}

/// TSV `CUI<TAB>seed<TAB>target1|target2|...` under a `#seeds v1` header.
pub fn write_seeds(path: &Path, seeds: &[SeedAssignment]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "#seeds v1").map_err(|e| Error::io(path, e))?;
    for s in seeds {
        writeln!(w, "{}\t{}\t{}", s.cui, s.seed, s.targets.join("|"))
            .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_seeds(path: &Path) -> Result<Vec<SeedAssignment>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let (cui, seed, targets) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(s), Some(t), None) => (c, s, t),
            _ => {
                return Err(Error::parse(
                    path,
                    lineno,
                    "expected CUI<TAB>seed<TAB>target1|target2|...",
                ))
            }
        };
        if !valid_cui(cui) {
            return Err(Error::parse(
                path,
                lineno,
                format!("CUI {cui:?} does not match C<digits>"),
            ));
        }
        if !seen.insert(cui.to_string()) {
            return Err(Error::DuplicateCui {
                cui: cui.to_string(),
                path: path.to_path_buf(),
                line: lineno,
            });
        }
        let targets: Vec<String> = targets
            .split('|')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        if targets.is_empty() {
            return Err(Error::EmptyTargets);
        }
        if targets.iter().any(|t| t == seed) {
            return Err(Error::parse(
                path,
                lineno,
                format!("seed {seed:?} listed among its own targets"),
            ));
        }
        out.push(SeedAssignment {
            cui: cui.to_string(),
            seed: seed.to_string(),
            targets,
        });
    }
    Ok(out)
}
