//! Pretrained word vectors and the stopword list used for knowledge retrieval.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_EMBEDDING_DIM: usize = 100;

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Token to vector map; every vector has length `dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    skipped: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self {
            dim,
            vectors: HashMap::new(),
            skipped: 0,
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                op: "EmbeddingTable::insert",
                lhs: (vector.len(), 1),
                rhs: (self.dim, 1),
            });
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Malformed lines skipped while loading.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

fn parse_line(line: &str, dim: usize) -> Option<(String, Vec<f64>)> {
    let mut fields = line.split_whitespace();
    let token = fields.next()?;
    let values = fields.map(str::parse::<f64>).collect::<std::result::Result<Vec<_>, _>>().ok()?;
    if values.len() != dim || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((token.to_string(), values))
}

/// Read a GloVe-style text file: `token v1 ... vD` per line.
///
/// Lines with the wrong arity or unparsable values are skipped and counted;
/// if more than half the non-blank lines are malformed the file is rejected.
/// The first occurrence of a repeated token wins.
pub fn load_embeddings(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Input("embedding dim must be positive".into()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = EmbeddingTable::new(dim);
    let mut lines = 0usize;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        lines += 1;
        match parse_line(line, dim) {
            Some((token, values)) => {
                table.vectors.entry(token).or_insert(values);
            }
            None => table.skipped += 1,
        }
    }
    if table.skipped * 2 > lines {
        return Err(Error::format(
            path,
            format!("{} of {} lines malformed for dim {dim}", table.skipped, lines),
        ));
    }
    if table.skipped > 0 {
        log::warn!("{}: skipped {} malformed embedding lines", path.display(), table.skipped);
    }
    Ok(table)
}

/// Lowercase stopword set.
#[derive(Clone, Debug, PartialEq)]
pub struct StopwordList {
    words: HashSet<String>,
}

impl StopwordList {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// One token per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl Default for StopwordList {
    /// The bundled English list.
    fn default() -> Self {
        Self::new(DEFAULT_STOPWORDS.lines())
    }
}
