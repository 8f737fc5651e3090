use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::knowledge::ExternalContextVector;
use crate::vocab::tokenize;

/// One context/response pair, tokenized.
#[derive(Clone, Debug, PartialEq)]
pub struct DialoguePair {
    pub id: String,
    pub context: Vec<String>,
    pub response: Vec<String>,
    pub ec: Option<ExternalContextVector>,
}

impl DialoguePair {
    pub fn new(id: impl Into<String>, context: Vec<String>, response: Vec<String>) -> Self {
        Self {
            id: id.into(),
            context,
            response,
            ec: None,
        }
    }

    pub fn from_text(id: impl Into<String>, context: &str, response: &str) -> Self {
        Self::new(id, tokenize(context), tokenize(response))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusLine {
    id: String,
    context: String,
    response: String,
}

/// Pairs in file order plus the number dropped for tokenizing to nothing.
#[derive(Clone, Debug, PartialEq)]
pub struct CorpusLoad {
    pub pairs: Vec<DialoguePair>,
    pub dropped: usize,
}

/// Reads a JSON-lines corpus of `{"id", "context", "response"}` objects.
pub fn load_corpus(path: &Path) -> Result<CorpusLoad> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusLine = serde_json::from_str(line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        let pair = DialoguePair::from_text(rec.id, &rec.context, &rec.response);
        if pair.context.is_empty() || pair.response.is_empty() {
            dropped += 1;
            continue;
        }
        pairs.push(pair);
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} pairs with an empty side", path.display());
    }
    Ok(CorpusLoad { pairs, dropped })
}

/// Rejects corpora with repeated ids.
pub fn check_unique_ids(pairs: &[DialoguePair]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(pairs.len());
    for p in pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Input(format!("duplicate pair id {:?}", p.id)));
        }
    }
    Ok(())
}
