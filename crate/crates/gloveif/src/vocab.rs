//! Token vocabulary with corpus frequencies and a stable token<->id mapping.
//! Ids are ranks: position in the (count desc, token asc) order, so id 0 is
//! always the most frequent token and ties cannot reorder across runs.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::Document;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Count tokens across documents and keep those with frequency >= min_count.
    pub fn build(documents: &[Document], min_count: u64) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::InvalidParam {
                what: "min_count".into(),
                why: "must be at least 1".into(),
            });
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in documents {
            for token in &doc.tokens {
                *counts.entry(token.as_str()).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(t, c)| (t.to_string(), c))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if entries.is_empty() {
            return Err(Error::EmptyVocabulary { min_count });
        }
        Ok(Self::from_entries(entries))
    }

    fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        Self { entries, index }
    }

    pub fn lookup(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.entries[id as usize].0
    }

    pub fn count(&self, id: u32) -> u64 {
        self.entries[id as usize].1
    }

    pub fn count_of(&self, token: &str) -> Option<u64> {
        self.lookup(token).map(|id| self.count(id))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| c).sum()
    }

    /// TSV `token<TAB>count` after a version header, one entry per line in
    /// rank order; the id of a token is its position among the data lines.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "#vocab v1").map_err(|e| Error::io(path, e))?;
        for (token, count) in &self.entries {
            writeln!(w, "{token}\t{count}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut entries = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, count) = line.split_once('\t').ok_or_else(|| {
                Error::parse(path, lineno + 1, "expected token<TAB>count")
            })?;
            if token.is_empty() {
                return Err(Error::parse(path, lineno + 1, "empty token"));
            }
            let count: u64 = count.trim().parse().map_err(|_| {
                Error::parse(path, lineno + 1, format!("invalid count {count:?}"))
            })?;
            if seen.insert(token.to_string(), lineno).is_some() {
                return Err(Error::parse(
                    path,
                    lineno + 1,
                    format!("duplicate token {token:?}"),
                ));
            }
            entries.push((token.to_string(), count));
        }
        if entries.is_empty() {
            return Err(Error::parse(path, 0, "vocabulary file has no entries"));
        }
        Ok(Self::from_entries(entries))
    }
}
