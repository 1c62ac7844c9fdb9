//! Sparse symmetric co-occurrence matrix with 1/distance weighting, plus the
//! feedback boosts that enrichment applies before retraining.
//!
//! Counting is done in integer arithmetic: every increment 1/d is stored as
//! the exact integer L/d where L = lcm(1..=window). Integer sums commute, so
//! sharded counting merged in any grouping is bit-identical to a single pass,
//! and the conversion to f64 happens exactly once per cell at the end.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::Document;
use crate::vocab::Vocabulary;

/// Canonical cell key: token ids with i < j. The matrix is symmetric, so one
/// stored cell represents both X_ij and X_ji.
pub type CellKey = (u32, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceMatrix {
    vocab_size: usize,
    window_size: usize,
    cells: BTreeMap<CellKey, f64>,
}

/// How much weight a feedback boost adds to each boosted cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoostPolicy {
    /// Add a fixed amount to every boosted cell.
    Constant(f64),
    /// Add beta times the mean nonzero weight of the seed's row, measured on
    /// the matrix as it stood before this round's boosts.
    RowMeanScaled(f64),
}

impl BoostPolicy {
    pub fn validate(&self) -> Result<()> {
        let v = match self {
            BoostPolicy::Constant(c) => *c,
            BoostPolicy::RowMeanScaled(b) => *b,
        };
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveBoost(v));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostPlan {
    pub pairs: Vec<(u32, u32)>,
    pub policy: BoostPolicy,
    pub rounds_applied: u32,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// lcm(1..=window); the common denominator for exact 1/d accumulation.
fn window_lcm(window_size: usize) -> Result<u64> {
    (1..=window_size as u64).try_fold(1u64, |acc, d| {
        let g = gcd(acc, d);
        (acc / g)
            .checked_mul(d)
            .ok_or(Error::WindowTooLarge(window_size as u32))
    })
}

/// Integer-valued partial counts for one corpus shard.
#[derive(Debug, Default)]
pub struct CountShard {
    numerators: HashMap<CellKey, u64>,
}

impl CountShard {
    fn count(&mut self, documents: &[Document], vocabulary: &Vocabulary, window_size: usize, lcm: u64) {
        let mut ids: Vec<u32> = Vec::new();
        for doc in documents {
            // Out-of-vocabulary tokens are deleted before windowing, so
            // distances are measured on the surviving sequence.
            ids.clear();
            ids.extend(doc.tokens.iter().filter_map(|t| vocabulary.lookup(t)));
            for pos in 0..ids.len() {
                let reach = window_size.min(ids.len() - 1 - pos);
                for d in 1..=reach {
                    let (a, b) = (ids[pos], ids[pos + d]);
                    if a == b {
                        continue;
                    }
                    let key = (a.min(b), a.max(b));
                    *self.numerators.entry(key).or_insert(0) += lcm / d as u64;
                }
            }
        }
    }

    fn merge(&mut self, other: CountShard) {
        for (key, n) in other.numerators {
            *self.numerators.entry(key).or_insert(0) += n;
        }
    }

    fn finalize(self, vocab_size: usize, window_size: usize, lcm: u64) -> CooccurrenceMatrix {
        let cells = self
            .numerators
            .into_iter()
            .map(|(key, n)| (key, n as f64 / lcm as f64))
            .collect();
        CooccurrenceMatrix {
            vocab_size,
            window_size,
            cells,
        }
    }
}

/// Count co-occurrences in one pass over the documents.
pub fn build_matrix(
    documents: &[Document],
    vocabulary: &Vocabulary,
    window_size: usize,
) -> Result<CooccurrenceMatrix> {
    build_matrix_sharded(documents, vocabulary, window_size, 1)
}

/// Count co-occurrences in `shards` document chunks (in parallel when more
/// than one) and merge. The result is bit-identical for any shard count.
pub fn build_matrix_sharded(
    documents: &[Document],
    vocabulary: &Vocabulary,
    window_size: usize,
    shards: usize,
) -> Result<CooccurrenceMatrix> {
    if window_size < 1 {
        return Err(Error::InvalidParam {
            what: "window_size".into(),
            why: "must be at least 1".into(),
        });
    }
    let lcm = window_lcm(window_size)?;
    let shards = shards.max(1).min(documents.len().max(1));
    let chunk = documents.len().div_ceil(shards);
    let mut merged = CountShard::default();
    if shards <= 1 || chunk == 0 {
        merged.count(documents, vocabulary, window_size, lcm);
    } else {
        let partials: Vec<CountShard> = std::thread::scope(|scope| {
            let handles: Vec<_> = documents
                .chunks(chunk)
                .map(|part| {
                    scope.spawn(move || {
                        let mut shard = CountShard::default();
                        shard.count(part, vocabulary, window_size, lcm);
                        shard
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("count shard panicked")).collect()
        });
        for p in partials {
            merged.merge(p);
        }
    }
    Ok(merged.finalize(vocabulary.len(), window_size, lcm))
}

impl CooccurrenceMatrix {
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// X_ij; 0.0 when the cell is absent. Symmetric in its arguments.
    pub fn get(&self, i: u32, j: u32) -> f64 {
        if i == j {
            return 0.0;
        }
        self.cells
            .get(&(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Canonical cells (i < j) in ascending key order.
    pub fn cells(&self) -> impl Iterator<Item = (CellKey, f64)> + '_ {
        self.cells.iter().map(|(&k, &x)| (k, x))
    }

    /// Both directed records per canonical cell, (i,j,x) then (j,i,x), in
    /// ascending canonical order. This is the trainer's stable base order.
    pub fn directed_records(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::with_capacity(self.cells.len() * 2);
        for (&(i, j), &x) in &self.cells {
            out.push((i, j, x));
            out.push((j, i, x));
        }
        out
    }

    /// Mean of the nonzero weights in a symmetric row; None for an empty row.
    pub fn row_mean(&self, id: u32) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0u64;
        for (&(i, j), &x) in &self.cells {
            if i == id || j == id {
                sum += x;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Apply a feedback boost, returning a new matrix; the input is unchanged.
    /// Row means for `RowMeanScaled` are taken from `self`, before any of this
    /// plan's increments land.
    pub fn apply_boost(&self, plan: &BoostPlan) -> Result<CooccurrenceMatrix> {
        plan.policy.validate()?;
        for &(s, t) in &plan.pairs {
            if s == t {
                return Err(Error::DiagonalBoost(s));
            }
            for id in [s, t] {
                if id as usize >= self.vocab_size {
                    return Err(Error::IdOutOfRange {
                        id,
                        vocab_size: self.vocab_size as u32,
                    });
                }
            }
        }
        let mut boosted = self.clone();
        let mut row_means: HashMap<u32, Option<f64>> = HashMap::new();
        for &(s, t) in &plan.pairs {
            let increment = match plan.policy {
                BoostPolicy::Constant(c) => Some(c),
                BoostPolicy::RowMeanScaled(beta) => {
                    let mean = *row_means.entry(s).or_insert_with(|| self.row_mean(s));
                    mean.map(|m| beta * m)
                }
            };
            match increment {
                Some(inc) => {
                    *boosted.cells.entry((s.min(t), s.max(t))).or_insert(0.0) += inc;
                }
                None => {
                    // A seed with no co-occurrences has no row scale to boost
                    // by; skip rather than invent one.
                    log::warn!("boost skipped: seed id {s} has an empty row");
                }
            }
        }
        Ok(boosted)
    }

    /// TSV with header `#cooccur v1 vocab=<n> window=<w>`, then `i<TAB>j<TAB>weight`
    /// rows with i < j, weights at 17 significant digits.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(
            w,
            "#cooccur v1 vocab={} window={}",
            self.vocab_size, self.window_size
        )
        .map_err(|e| Error::io(path, e))?;
        for (&(i, j), &x) in &self.cells {
            writeln!(w, "{i}\t{j}\t{x:.16e}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io(path, e))?;
        let header = header.trim_end();
        let rest = header.strip_prefix("#cooccur v1 vocab=").ok_or_else(|| {
            Error::parse(path, 1, "expected header '#cooccur v1 vocab=<n> window=<w>'")
        })?;
        let (vocab_str, window_part) = rest
            .split_once(" window=")
            .ok_or_else(|| Error::parse(path, 1, "header missing window=<w>"))?;
        let vocab_size: usize = vocab_str
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad vocab size {vocab_str:?}")))?;
        let window_size: usize = window_part
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad window size {window_part:?}")))?;
        let mut cells = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (i, j, x) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
                (Some(i), Some(j), Some(x), None) => (i, j, x),
                _ => return Err(Error::parse(path, lineno, "expected i<TAB>j<TAB>weight")),
            };
            let i: u32 = i
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad id {i:?}")))?;
            let j: u32 = j
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad id {j:?}")))?;
            let x: f64 = x
                .parse()
                .map_err(|_| Error::parse(path, lineno, format!("bad weight {x:?}")))?;
            if i >= j {
                return Err(Error::parse(path, lineno, "cells must satisfy i < j"));
            }
            if j as usize >= vocab_size {
                return Err(Error::IdOutOfRange {
                    id: j,
                    vocab_size: vocab_size as u32,
                });
            }
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::NonPositiveWeight { i, j, value: x });
            }
            if cells.insert((i, j), x).is_some() {
                return Err(Error::parse(path, lineno, format!("duplicate cell ({i},{j})")));
            }
        }
        Ok(Self {
            vocab_size,
            window_size,
            cells,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::Document;

    fn docs(lines: &[&str]) -> Vec<Document> {
        lines
            .iter()
            .enumerate()
            .map(|(id, l)| Document {
                id,
                tokens: l.split_whitespace().map(str::to_string).collect(),
            })
            .collect()
    }

    fn vocab_for(d: &[Document]) -> Vocabulary {
        Vocabulary::build(d, 1).unwrap()
    }

    /// Brute-force oracle: for every ordered position pair in every document,
    /// accumulate exact integer numerators over the common denominator.
    fn oracle(
        documents: &[Document],
        vocabulary: &Vocabulary,
        window_size: usize,
    ) -> BTreeMap<CellKey, (u64, u64)> {
        let lcm = window_lcm(window_size).unwrap();
        let mut out: BTreeMap<CellKey, (u64, u64)> = BTreeMap::new();
        for doc in documents {
            let ids: Vec<u32> = doc
                .tokens
                .iter()
                .filter_map(|t| vocabulary.lookup(t))
                .collect();
            for p in 0..ids.len() {
                for q in 0..ids.len() {
                    if p == q || ids[p] == ids[q] {
                        continue;
                    }
                    let d = p.abs_diff(q);
                    if d > window_size || p > q {
                        continue;
                    }
                    let key = (ids[p].min(ids[q]), ids[p].max(ids[q]));
                    out.entry(key).or_insert((0, lcm)).0 += lcm / d as u64;
                }
            }
        }
        out
    }

    #[test]
    fn three_token_document_window_two() {
        let d = docs(&["aaa bbb ccc"]);
        let v = vocab_for(&d);
        let m = build_matrix(&d, &v, 2).unwrap();
        let (a, b, c) = (
            v.lookup("aaa").unwrap(),
            v.lookup("bbb").unwrap(),
            v.lookup("ccc").unwrap(),
        );
        assert_eq!(m.get(a, b), 1.0);
        assert_eq!(m.get(b, a), 1.0);
        assert_eq!(m.get(b, c), 1.0);
        assert_eq!(m.get(a, c), 0.5);
        assert_eq!(m.len(), 3);
    }

    #[test]
    fn diagonal_is_excluded() {
        let d = docs(&["aaa aaa"]);
        let v = vocab_for(&d);
        let m = build_matrix(&d, &v, 10).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn duplicate_documents_double_every_cell() {
        let d1 = docs(&["aaa bbb ccc bbb ddd"]);
        let d2 = docs(&["aaa bbb ccc bbb ddd", "aaa bbb ccc bbb ddd"]);
        let v = vocab_for(&d1);
        let m1 = build_matrix(&d1, &v, 3).unwrap();
        let m2 = build_matrix(&d2, &v, 3).unwrap();
        assert_eq!(m1.len(), m2.len());
        for ((k1, x1), (k2, x2)) in m1.cells().zip(m2.cells()) {
            assert_eq!(k1, k2);
            assert_eq!(2.0 * x1, x2);
        }
    }

    #[test]
    fn oov_tokens_do_not_occupy_window_positions() {
        // "zzz" is out of vocabulary; aaa and bbb become adjacent.
        let d = docs(&["aaa zzz bbb"]);
        let keep = docs(&["aaa bbb"]);
        let v = vocab_for(&keep);
        let m = build_matrix(&d, &v, 1).unwrap();
        assert_eq!(m.get(v.lookup("aaa").unwrap(), v.lookup("bbb").unwrap()), 1.0);
    }

    #[test]
    fn windows_do_not_cross_documents() {
        let d = docs(&["aaa", "bbb"]);
        let v = vocab_for(&d);
        let m = build_matrix(&d, &v, 10).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn boost_constant_adds_to_both_directions() {
        let d = docs(&["aaa bbb aaa bbb aaa"]);
        let v = vocab_for(&d);
        let m = build_matrix(&d, &v, 1).unwrap();
        let (a, b) = (v.lookup("aaa").unwrap(), v.lookup("bbb").unwrap());
        let before = m.get(a, b);
        let plan = BoostPlan {
            pairs: vec![(a, b)],
            policy: BoostPolicy::Constant(1.0),
            rounds_applied: 1,
        };
        let boosted = m.apply_boost(&plan).unwrap();
        assert_eq!(boosted.get(a, b), before + 1.0);
        assert_eq!(boosted.get(b, a), before + 1.0);
        assert_eq!(m.get(a, b), before); // input untouched
    }

    #[test]
    fn boost_row_mean_creates_new_cell() {
        // Row of s has nonzero weights {1.0, 3.0}; mean 2.0.
        let mut cells = BTreeMap::new();
        cells.insert((0u32, 1u32), 1.0);
        cells.insert((0u32, 2u32), 3.0);
        let m = CooccurrenceMatrix {
            vocab_size: 4,
            window_size: 10,
            cells,
        };
        let plan = BoostPlan {
            pairs: vec![(0, 3)],
            policy: BoostPolicy::RowMeanScaled(1.0),
            rounds_applied: 1,
        };
        let boosted = m.apply_boost(&plan).unwrap();
        assert_eq!(boosted.get(0, 3), 2.0);
        assert_eq!(boosted.get(3, 0), 2.0);
        assert_eq!(boosted.len(), 3);
    }

    #[test]
    fn boost_row_means_measured_before_any_increment() {
        // Two boosts on the same row: the second must not see the first.
        let mut cells = BTreeMap::new();
        cells.insert((0u32, 1u32), 2.0);
        let m = CooccurrenceMatrix {
            vocab_size: 4,
            window_size: 10,
            cells,
        };
        let plan = BoostPlan {
            pairs: vec![(0, 2), (0, 3)],
            policy: BoostPolicy::RowMeanScaled(1.0),
            rounds_applied: 1,
        };
        let boosted = m.apply_boost(&plan).unwrap();
        assert_eq!(boosted.get(0, 2), 2.0);
        assert_eq!(boosted.get(0, 3), 2.0);
    }

    #[test]
    fn empty_plan_is_identity() {
        let d = docs(&["aaa bbb ccc"]);
        let v = vocab_for(&d);
        let m = build_matrix(&d, &v, 2).unwrap();
        let plan = BoostPlan {
            pairs: vec![],
            policy: BoostPolicy::Constant(1.0),
            rounds_applied: 0,
        };
        assert_eq!(m.apply_boost(&plan).unwrap(), m);
    }

    #[test]
    fn boost_rejects_bad_plans() {
        let d = docs(&["aaa bbb"]);
        let v = vocab_for(&d);
        let m = build_matrix(&d, &v, 1).unwrap();
        let diag = BoostPlan {
            pairs: vec![(0, 0)],
            policy: BoostPolicy::Constant(1.0),
            rounds_applied: 1,
        };
        assert!(matches!(m.apply_boost(&diag), Err(Error::DiagonalBoost(0))));
        let oob = BoostPlan {
            pairs: vec![(0, 99)],
            policy: BoostPolicy::Constant(1.0),
            rounds_applied: 1,
        };
        assert!(matches!(m.apply_boost(&oob), Err(Error::IdOutOfRange { .. })));
        let nonpos = BoostPlan {
            pairs: vec![(0, 1)],
            policy: BoostPolicy::Constant(0.0),
            rounds_applied: 1,
        };
        assert!(matches!(m.apply_boost(&nonpos), Err(Error::NonPositiveBoost(_))));
    }

    #[test]
    fn window_lcm_overflow_is_an_error() {
        assert!(window_lcm(10).unwrap() == 2520);
        assert!(matches!(window_lcm(60), Err(Error::WindowTooLarge(_))));
    }

    #[test]
    fn tsv_round_trip_preserves_bits() {
        let d = docs(&["aaa bbb ccc ddd aaa ccc", "bbb ddd aaa"]);
        let v = vocab_for(&d);
        let m = build_matrix(&d, &v, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        m.write_tsv(&path).unwrap();
        let back = CooccurrenceMatrix::read_tsv(&path).unwrap();
        assert_eq!(m, back);
    }

    fn random_docs(seed: u64, n_docs: usize, max_len: usize, vocab: usize) -> Vec<Document> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n_docs)
            .map(|id| {
                let len = rng.gen_range(0..=max_len);
                Document {
                    id,
                    tokens: (0..len)
                        .map(|_| format!("t{:02}", rng.gen_range(0..vocab)))
                        .collect(),
                }
            })
            .collect()
    }

    #[test]
    fn matches_brute_force_oracle_exactly() {
        for seed in 0..20 {
            let d = random_docs(seed, 8, 40, 15);
            if d.iter().all(|doc| doc.tokens.is_empty()) {
                continue;
            }
            let v = vocab_for(&d);
            let window = 1 + (seed as usize % 7);
            let m = build_matrix(&d, &v, window).unwrap();
            let expect = oracle(&d, &v, window);
            assert_eq!(m.len(), expect.len(), "seed {seed}");
            for (key, (num, den)) in expect {
                let got = m.get(key.0, key.1);
                assert_eq!(got, num as f64 / den as f64, "seed {seed} cell {key:?}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn prop_sharded_build_is_bit_identical(
            seed in 0u64..200,
            shards in 1usize..6,
            window in 1usize..8,
        ) {
            let d = random_docs(seed, 12, 30, 12);
            if d.iter().all(|doc| doc.tokens.is_empty()) {
                return Ok(());
            }
            let v = vocab_for(&d);
            let single = build_matrix(&d, &v, window).unwrap();
            let sharded = build_matrix_sharded(&d, &v, window, shards).unwrap();
            proptest::prop_assert_eq!(single, sharded);
        }

        #[test]
        fn prop_boost_never_decreases_cells(
            seed in 0u64..50,
            beta in 0.1f64..3.0,
        ) {
            let d = random_docs(seed, 6, 25, 10);
            if d.iter().all(|doc| doc.tokens.is_empty()) {
                return Ok(());
            }
            let v = vocab_for(&d);
            let m = build_matrix(&d, &v, 5).unwrap();
            if v.len() < 2 {
                return Ok(());
            }
            let plan = BoostPlan {
                pairs: vec![(0, 1), (0, (v.len() as u32 - 1).max(1))].into_iter().filter(|(a, b)| a != b).collect(),
                policy: BoostPolicy::RowMeanScaled(beta),
                rounds_applied: 1,
            };
            let boosted = m.apply_boost(&plan).unwrap();
            for ((k1, x1), (k2, x2)) in m.cells().zip(boosted.cells().filter(|(k, _)| m.get(k.0, k.1) > 0.0)) {
                proptest::prop_assert_eq!(k1, k2);
                proptest::prop_assert!(x2 >= x1);
            }
        }
    }
}
