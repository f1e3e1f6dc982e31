//! Word-embedding storage and the context encoder.
//!
//! A (subject, object) label pair is mapped to a low-dimensional
//! nonnegative code: the two word vectors are concatenated
//! (subject first), projected by a shared matrix `Q`, and passed through
//! ReLU. That code is what the context-aware layers in [`crate::model`]
//! consume.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::numcore::{relu, Matrix};

/// Immutable table of word vectors plus a fallback for unknown words.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dimension: usize,
    table: BTreeMap<String, Vec<f64>>,
    fallback: Vec<f64>,
}

/// Output of [`context_code`]: the nonnegative code together with the
/// labels it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextCode {
    pub code: Vec<f64>,
    pub subject: String,
    pub object: String,
}

/// Canonical form for object labels: trimmed, with internal whitespace
/// runs replaced by a single underscore. Lookup stays case-sensitive.
pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join("_")
}

impl EmbeddingStore {
    /// Parse the textual word2vec convention: one `word v1 … ve` record per
    /// line, whitespace separated, `#`-prefixed lines skipped. When a word
    /// repeats, the last occurrence wins. The fallback vector is the
    /// componentwise mean of the deduplicated table.
    pub fn load(reader: impl BufRead) -> Result<Self> {
        let mut table: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut dimension: Option<usize> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let word = parts.next().expect("non-empty line has a first token");
            let mut vector = Vec::new();
            for tok in parts {
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("cannot parse {tok:?} as a number"),
                })?;
                vector.push(v);
            }
            if vector.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("word {word:?} has no vector components"),
                });
            }
            match dimension {
                None => dimension = Some(vector.len()),
                Some(e) if e != vector.len() => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!(
                            "vector has {} components, expected {e}",
                            vector.len()
                        ),
                    });
                }
                Some(_) => {}
            }
            table.insert(word.to_string(), vector);
        }
        let dimension = dimension.ok_or(Error::EmptyInput("embedding stream"))?;
        let mut fallback = vec![0.0; dimension];
        for vector in table.values() {
            for (f, v) in fallback.iter_mut().zip(vector) {
                *f += v;
            }
        }
        let n = table.len() as f64;
        for f in fallback.iter_mut() {
            *f /= n;
        }
        Ok(EmbeddingStore {
            dimension,
            table,
            fallback,
        })
    }

    /// Write entries in the same textual format [`EmbeddingStore::load`]
    /// reads. Values are printed with shortest round-trip formatting, so a
    /// load after write reproduces them bit for bit.
    pub fn write_entries<W: Write>(
        out: &mut W,
        entries: &[(String, Vec<f64>)],
    ) -> std::io::Result<()> {
        for (word, vector) in entries {
            write!(out, "{word}")?;
            for v in vector {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Vector length `e`.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Mean vector returned for unknown words.
    pub fn fallback(&self) -> &[f64] {
        &self.fallback
    }

    /// Embedding for `word`, or the fallback mean when absent. Total by
    /// design: evaluation over labels never seen in the embedding file must
    /// not abort mid-run.
    pub fn lookup(&self, word: &str) -> &[f64] {
        self.table
            .get(normalize_label(word).as_str())
            .map_or(&self.fallback, Vec::as_slice)
    }

    /// Like [`EmbeddingStore::lookup`] but unknown words are an error.
    pub fn lookup_strict(&self, word: &str) -> Result<&[f64]> {
        let key = normalize_label(word);
        self.table
            .get(key.as_str())
            .map(Vec::as_slice)
            .ok_or(Error::UnknownWord(key))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.table.contains_key(normalize_label(word).as_str())
    }
}

/// Concatenation of the subject and object embeddings, subject first;
/// length `2e`.
pub fn encode_pair(store: &EmbeddingStore, subject: &str, object: &str) -> Vec<f64> {
    let mut z = Vec::with_capacity(2 * store.dimension());
    z.extend_from_slice(store.lookup(subject));
    z.extend_from_slice(store.lookup(object));
    z
}

/// Strict-mode variant of [`encode_pair`]: unknown words are errors.
pub fn encode_pair_strict(
    store: &EmbeddingStore,
    subject: &str,
    object: &str,
) -> Result<Vec<f64>> {
    let mut z = Vec::with_capacity(2 * store.dimension());
    z.extend_from_slice(store.lookup_strict(subject)?);
    z.extend_from_slice(store.lookup_strict(object)?);
    Ok(z)
}

/// Project a label pair into the code space: `relu(Q · encode_pair)`.
/// `Q` must have `2e` columns.
pub fn context_code(
    store: &EmbeddingStore,
    q: &Matrix,
    subject: &str,
    object: &str,
) -> Result<ContextCode> {
    let z = encode_pair(store, subject, object);
    if q.cols() != z.len() {
        return Err(Error::DimensionMismatch {
            op: "context_code",
            left: format!("projection {}x{}", q.rows(), q.cols()),
            right: format!("pair embedding of length {}", z.len()),
        });
    }
    let code = relu(&q.matvec(&z)?);
    Ok(ContextCode {
        code,
        subject: subject.to_string(),
        object: object.to_string(),
    })
}
