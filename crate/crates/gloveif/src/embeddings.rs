//! Embedding interchange format: line 1 `<vocab_size> <dim>`, then one
//! `token v1 v2 ... vdim` line per token. Written for our own models and read
//! back for queries, and also the import path for externally trained vectors
//! so they can be scored by the same evaluation harness.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::EmbeddingModel;
use crate::vocab::Vocabulary;

/// Token-keyed final vectors, the query-side view of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    dim: usize,
    data: Vec<f64>,
}

impl WordVectors {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != tokens.len() * dim {
            return Err(Error::InvalidParam {
                what: "embedding data".into(),
                why: format!(
                    "expected {} values for {} tokens of dim {}, got {}",
                    tokens.len() * dim,
                    tokens.len(),
                    dim,
                    data.len()
                ),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidParam {
                    what: "embedding tokens".into(),
                    why: format!("duplicate token {t:?}"),
                });
            }
        }
        Ok(Self {
            tokens,
            index,
            dim,
            data,
        })
    }

    /// Final (main + context) vectors of a trained model, token order matching
    /// vocabulary rank.
    pub fn from_model(model: &EmbeddingModel, vocabulary: &Vocabulary) -> Self {
        let dim = model.dim;
        let mut data = Vec::with_capacity(vocabulary.len() * dim);
        for id in 0..vocabulary.len() as u32 {
            data.extend(model.final_vector(id));
        }
        Self::new(vocabulary.tokens().map(str::to_string).collect(), dim, data)
            .expect("vocabulary tokens are unique")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lookup(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn vector(&self, id: u32) -> &[f64] {
        let s = id as usize * self.dim;
        &self.data[s..s + self.dim]
    }

    pub fn vector_of(&self, token: &str) -> Option<&[f64]> {
        self.lookup(token).map(|id| self.vector(id))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "{} {}", self.tokens.len(), self.dim).map_err(|e| Error::io(path, e))?;
        let mut line = String::new();
        for id in 0..self.tokens.len() as u32 {
            line.clear();
            line.push_str(self.token(id));
            for v in self.vector(id) {
                // 17 significant digits: parses back to the identical f64.
                line.push_str(&format!(" {v:.16e}"));
            }
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io(path, e))?;
        let mut parts = header.split_whitespace();
        let (count, dim) = match (parts.next(), parts.next(), parts.next()) {
            (Some(c), Some(d), None) => (c, d),
            _ => return Err(Error::parse(path, 1, "expected header '<vocab_size> <dim>'")),
        };
        let count: usize = count
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad vocab size {count:?}")))?;
        let dim: usize = dim
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad dimension {dim:?}")))?;
        if dim == 0 {
            return Err(Error::parse(path, 1, "dimension must be positive"));
        }
        let mut tokens = Vec::with_capacity(count);
        let mut data = Vec::with_capacity(count * dim);
        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts
                .next()
                .ok_or_else(|| Error::parse(path, lineno, "empty line"))?;
            let before = data.len();
            for p in parts {
                let v: f64 = p
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("bad value {p:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(path, lineno, format!("non-finite value {v}")));
                }
                data.push(v);
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {dim} values, found {}", data.len() - before),
                ));
            }
            tokens.push(token.to_string());
        }
        if tokens.len() != count {
            return Err(Error::parse(
                path,
                0,
                format!("header claims {count} tokens, file has {}", tokens.len()),
            ));
        }
        Self::new(tokens, dim, data)
    }
}
