//! Corpus cleaning: lowercase, strip punctuation and digits, drop short
//! tokens and stopwords, and optionally stem. One input line is one document;
//! co-occurrence windows later in the pipeline never cross documents, so the
//! line/document contract established here is load-bearing.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stem::stem;

/// A cleaned document: its ordinal position among nonempty documents and the
/// surviving tokens in original order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: usize,
    pub tokens: Vec<String>,
}

/// Token-cleaning policy. Stopword sets are stored already normalized (same
/// lowercase/strip/stem treatment tokens get), so membership tests compare
/// like with like.
#[derive(Debug, Clone)]
pub struct CleaningConfig {
    pub min_token_length: usize,
    pub stemming_enabled: bool,
    standard_stopwords: HashSet<String>,
    medical_stopwords: HashSet<String>,
}

impl CleaningConfig {
    pub fn new<I, J>(
        min_token_length: usize,
        stemming_enabled: bool,
        standard_stopwords: I,
        medical_stopwords: J,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = String>,
        J: IntoIterator<Item = String>,
    {
        if min_token_length < 1 {
            return Err(Error::InvalidParam {
                what: "min_token_length".into(),
                why: "must be at least 1".into(),
            });
        }
        let normalize = |words: &mut dyn Iterator<Item = String>| -> HashSet<String> {
            words
                .filter_map(|w| {
                    let s = normalize_token(&w, stemming_enabled);
                    (!s.is_empty()).then_some(s)
                })
                .collect()
        };
        Ok(Self {
            min_token_length,
            stemming_enabled,
            standard_stopwords: normalize(&mut standard_stopwords.into_iter()),
            medical_stopwords: normalize(&mut medical_stopwords.into_iter()),
        })
    }

    /// Config with the bundled stopword lists.
    pub fn with_default_stopwords(min_token_length: usize, stemming_enabled: bool) -> Self {
        Self::new(
            min_token_length,
            stemming_enabled,
            parse_stopword_lines(DEFAULT_STANDARD_STOPWORDS),
            parse_stopword_lines(DEFAULT_MEDICAL_STOPWORDS),
        )
        .expect("bundled stopword lists are valid")
    }

    pub fn is_stopword(&self, normalized: &str) -> bool {
        self.standard_stopwords.contains(normalized) || self.medical_stopwords.contains(normalized)
    }

    /// Clean one raw whitespace-delimited word. Returns None when the word is
    /// filtered out (too short after cleaning, or a stopword).
    pub fn clean_token(&self, raw: &str) -> Option<String> {
        let cleaned = normalize_token(raw, self.stemming_enabled);
        if cleaned.chars().count() < self.min_token_length {
            return None;
        }
        if self.is_stopword(&cleaned) {
            return None;
        }
        Some(cleaned)
    }

    /// Clean every word of one raw document line.
    pub fn clean_line(&self, line: &str) -> Vec<String> {
        line.split_whitespace()
            .filter_map(|w| self.clean_token(w))
            .collect()
    }
}

/// Lowercase and keep only alphabetic characters, then optionally stem.
/// Punctuation and digits are removed in place, not treated as split points.
fn normalize_token(raw: &str, stemming_enabled: bool) -> String {
    let stripped: String = raw
        .chars()
        .flat_map(|c| c.to_lowercase())
        .filter(|c| c.is_alphabetic())
        .collect();
    if stemming_enabled {
        stem(&stripped)
    } else {
        stripped
    }
}

const DEFAULT_STANDARD_STOPWORDS: &str = include_str!("../assets/stopwords_en.txt");
const DEFAULT_MEDICAL_STOPWORDS: &str = include_str!("../assets/stopwords_medical.txt");

/// Bundled general-English stopword list, one raw token per entry.
pub fn default_standard_stopwords() -> Vec<String> {
    parse_stopword_lines(DEFAULT_STANDARD_STOPWORDS)
}

/// Bundled health-forum stopword list (domain terms too common to be useful).
pub fn default_medical_stopwords() -> Vec<String> {
    parse_stopword_lines(DEFAULT_MEDICAL_STOPWORDS)
}

fn parse_stopword_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Load a stopword file: one token per line, `#` comment lines ignored.
pub fn load_stopwords(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_stopword_lines(&text))
}

/// Tokenize a raw corpus file, one document per line. Lines whose cleaned
/// token list is empty yield no Document; ids are consecutive from 0 over the
/// documents actually emitted.
pub fn tokenize_corpus(corpus_path: &Path, config: &CleaningConfig) -> Result<Vec<Document>> {
    let file = std::fs::File::open(corpus_path).map_err(|e| Error::io(corpus_path, e))?;
    tokenize_reader(file, corpus_path, config)
}

fn tokenize_reader<R: Read>(
    reader: R,
    path: &Path,
    config: &CleaningConfig,
) -> Result<Vec<Document>> {
    let mut reader = BufReader::new(reader);
    let mut documents = Vec::new();
    let mut raw = Vec::new();
    let mut offset: u64 = 0;
    loop {
        raw.clear();
        let n = reader
            .read_until(b'\n', &mut raw)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        let line = std::str::from_utf8(&raw).map_err(|e| Error::InvalidUtf8 {
            path: path.to_path_buf(),
            offset: offset + e.valid_up_to() as u64,
        })?;
        let tokens = config.clean_line(line);
        if !tokens.is_empty() {
            documents.push(Document {
                id: documents.len(),
                tokens,
            });
        }
        offset += n as u64;
    }
    Ok(documents)
}

/// Read an already-cleaned corpus (the `preprocess` output format) back into
/// documents without re-cleaning. Tokens are taken verbatim.
pub fn read_clean_corpus(path: &Path) -> Result<Vec<Document>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') {
            continue;
        }
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if !tokens.is_empty() {
            documents.push(Document {
                id: documents.len(),
                tokens,
            });
        }
    }
    Ok(documents)
}

/// Write cleaned documents one per line after a version header, tokens
/// space-separated. Cleaned tokens are alphabetic, so the `#` header line
/// can never collide with data.
pub fn write_clean_corpus(path: &Path, documents: &[Document]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "#cleaned v1").map_err(|e| Error::io(path, e))?;
    for doc in documents {
        writeln!(w, "{}", doc.tokens.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
