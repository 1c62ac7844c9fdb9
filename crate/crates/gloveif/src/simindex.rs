//! Exact cosine nearest-neighbor queries over final vectors. Brute force by
//! design: at desk-scale vocabularies a full scan is fast, trivially correct,
//! and deterministic, which the feedback loop and the tests both rely on.

use crate::embeddings::WordVectors;
use crate::error::{Error, Result};

/// cosine(u, v) = u.v / (|u| |v|).
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch(u.len(), v.len()));
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    pub token: String,
    pub cosine: f64,
}

/// Read-only index: unit-normalized copies of every vector, zero-norm rows
/// remembered so they never appear in results.
#[derive(Debug, Clone)]
pub struct SimilarityIndex<'a> {
    vectors: &'a WordVectors,
    normalized: Vec<f64>,
    usable: Vec<bool>,
}

impl<'a> SimilarityIndex<'a> {
    pub fn new(vectors: &'a WordVectors) -> Self {
        let dim = vectors.dim();
        let n = vectors.len();
        let mut normalized = vec![0.0; n * dim];
        let mut usable = vec![false; n];
        for id in 0..n as u32 {
            let row = vectors.vector(id);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                usable[id as usize] = true;
                let out = &mut normalized[id as usize * dim..(id as usize + 1) * dim];
                for (o, v) in out.iter_mut().zip(row) {
                    *o = v / norm;
                }
            }
        }
        Self {
            vectors,
            normalized,
            usable,
        }
    }

    pub fn vectors(&self) -> &WordVectors {
        self.vectors
    }

    fn normalized_row(&self, id: u32) -> &[f64] {
        let dim = self.vectors.dim();
        &self.normalized[id as usize * dim..(id as usize + 1) * dim]
    }

    /// Top-n neighbors of a token, excluding the token itself and `exclude`.
    /// Sorted by cosine descending; ties broken by vocabulary rank ascending.
    pub fn top_similar(
        &self,
        query_token: &str,
        n: usize,
        exclude: &[&str],
    ) -> Result<Vec<Neighbor>> {
        let qid = self
            .vectors
            .lookup(query_token)
            .ok_or_else(|| Error::UnknownToken(query_token.to_string()))?;
        if !self.usable[qid as usize] {
            return Err(Error::ZeroVector(query_token.to_string()));
        }
        let excluded: Vec<u32> = exclude
            .iter()
            .filter_map(|t| self.vectors.lookup(t))
            .collect();
        let q = self.normalized_row(qid);
        let mut scored: Vec<(u32, f64)> = Vec::with_capacity(self.vectors.len());
        for id in 0..self.vectors.len() as u32 {
            if id == qid || !self.usable[id as usize] || excluded.contains(&id) {
                continue;
            }
            let dot: f64 = q
                .iter()
                .zip(self.normalized_row(id))
                .map(|(a, b)| a * b)
                .sum();
            scored.push((id, dot));
        }
        scored.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(n);
        Ok(scored
            .into_iter()
            .map(|(id, cosine)| Neighbor {
                token: self.vectors.token(id).to_string(),
                cosine,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index_of(tokens: &[&str], dim: usize, data: Vec<f64>) -> WordVectors {
        WordVectors::new(tokens.iter().map(|t| t.to_string()).collect(), dim, data).unwrap()
    }

    #[test]
    fn cosine_fixtures() {
        assert_eq!(cosine(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c - 0.7071067811865475).abs() < 1e-15);
    }

    #[test]
    fn cosine_errors() {
        assert!(matches!(cosine(&[1.0], &[1.0, 2.0]), Err(Error::DimMismatch(1, 2))));
        assert!(matches!(cosine(&[0.0, 0.0], &[1.0, 2.0]), Err(Error::ZeroNorm)));
    }

    #[test]
    fn top_similar_hand_fixture() {
        // q=(1,0), a=(1,0), b=(0,1), c=(-1,0)
        let v = index_of(
            &["qqq", "aaa", "bbb", "ccc"],
            2,
            vec![1.0, 0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.0],
        );
        let idx = SimilarityIndex::new(&v);
        let got = idx.top_similar("qqq", 2, &[]).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].token, "aaa");
        assert_eq!(got[0].cosine, 1.0);
        assert_eq!(got[1].token, "bbb");
        assert_eq!(got[1].cosine, 0.0);
    }

    #[test]
    fn n_larger_than_vocab_returns_everything_but_query() {
        let v = index_of(
            &["qqq", "aaa", "bbb"],
            2,
            vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0],
        );
        let idx = SimilarityIndex::new(&v);
        let got = idx.top_similar("qqq", 100, &[]).unwrap();
        assert_eq!(got.len(), 2);
        assert!(got.iter().all(|nb| nb.token != "qqq"));
    }

    #[test]
    fn exclude_set_is_honored() {
        let v = index_of(
            &["qqq", "aaa", "bbb"],
            2,
            vec![1.0, 0.0, 1.0, 0.1, 1.0, 0.2],
        );
        let idx = SimilarityIndex::new(&v);
        let got = idx.top_similar("qqq", 5, &["aaa"]).unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].token, "bbb");
    }

    #[test]
    fn ties_break_by_vocabulary_rank() {
        // bbb and ccc both have cosine 1 with the query; bbb has lower rank.
        let v = index_of(
            &["qqq", "zzz", "bbb", "ccc"],
            2,
            vec![1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 3.0, 0.0],
        );
        let idx = SimilarityIndex::new(&v);
        let got = idx.top_similar("qqq", 3, &[]).unwrap();
        assert_eq!(got[0].token, "bbb");
        assert_eq!(got[1].token, "ccc");
        assert_eq!(got[2].token, "zzz");
    }

    #[test]
    fn zero_vectors_are_skipped_or_rejected() {
        let v = index_of(
            &["qqq", "aaa", "zero"],
            2,
            vec![1.0, 0.0, 0.9, 0.1, 0.0, 0.0],
        );
        let idx = SimilarityIndex::new(&v);
        let got = idx.top_similar("qqq", 5, &[]).unwrap();
        assert_eq!(got.len(), 1, "zero-norm row must not appear");
        assert!(matches!(
            idx.top_similar("zero", 3, &[]),
            Err(Error::ZeroVector(t)) if t == "zero"
        ));
        assert!(matches!(
            idx.top_similar("missing", 3, &[]),
            Err(Error::UnknownToken(t)) if t == "missing"
        ));
    }

    #[test]
    fn normalized_cache_rows_are_unit_norm() {
        let v = index_of(
            &["aaa", "bbb"],
            3,
            vec![3.0, 4.0, 12.0, 0.1, 0.2, 0.3],
        );
        let idx = SimilarityIndex::new(&v);
        for id in 0..2u32 {
            let norm: f64 = idx.normalized_row(id).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    proptest::proptest! {
        #[test]
        fn prop_rankings_invariant_under_positive_scaling(
            scale in 0.001f64..1000.0,
            seed in 0u64..50,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = 8;
            let dim = 4;
            let data: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let tokens: Vec<&str> = ["t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7"].to_vec();
            let v1 = index_of(&tokens, dim, data.clone());
            // Scale one full row by a positive constant.
            let mut data2 = data;
            for d in 0..dim {
                data2[2 * dim + d] *= scale;
            }
            let v2 = index_of(&tokens, dim, data2);
            let i1 = SimilarityIndex::new(&v1);
            let i2 = SimilarityIndex::new(&v2);
            let a = i1.top_similar("t0", 5, &[]).unwrap();
            let b = i2.top_similar("t0", 5, &[]).unwrap();
            let ta: Vec<&str> = a.iter().map(|nb| nb.token.as_str()).collect();
            let tb: Vec<&str> = b.iter().map(|nb| nb.token.as_str()).collect();
            proptest::prop_assert_eq!(ta, tb);
        }
    }
}
