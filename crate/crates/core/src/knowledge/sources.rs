use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::vocab::tokenize;

/// Anything that maps a context token to a list of knowledge tokens.
pub trait KnowledgeSource {
    /// Knowledge tokens for `token`; empty when nothing matches.
    fn retrieve(&self, token: &str) -> &[String];
}

/// Offline snapshot of article summaries keyed by lowercase title.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WikiSummarySource {
    summaries: HashMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct WikiLine {
    title: String,
    summary: String,
}

impl WikiSummarySource {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a summary; the first entry for a title is kept.
    pub fn insert(&mut self, title: &str, summary: &str) {
        self.summaries
            .entry(title.trim().to_lowercase())
            .or_insert_with(|| tokenize(summary));
    }

    /// JSON-lines, `{"title": ..., "summary": ...}` per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut src = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: WikiLine = serde_json::from_str(line)
                .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
            src.insert(&rec.title, &rec.summary);
        }
        Ok(src)
    }

    pub fn wiki_summary_query(&self, token: &str) -> &[String] {
        self.summaries
            .get(&token.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.summaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.summaries.is_empty()
    }
}

impl KnowledgeSource for WikiSummarySource {
    fn retrieve(&self, token: &str) -> &[String] {
        self.wiki_summary_query(token)
    }
}

/// Entity to value tokens, built from `(entity, relation, value)` triples.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NellSource {
    values: HashMap<String, Vec<String>>,
    skipped: usize,
}

impl NellSource {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends the tokenized value of one triple. Relations are not filtered.
    pub fn add_triple(&mut self, entity: &str, _relation: &str, value: &str) {
        self.values
            .entry(entity.trim().to_lowercase())
            .or_default()
            .extend(tokenize(value));
    }

    /// Tab-separated `entity<TAB>relation<TAB>value`; other lines are skipped and counted.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut src = Self::new();
        for line in text.lines() {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                src.skipped += 1;
                continue;
            }
            src.add_triple(cols[0], cols[1], cols[2]);
        }
        if src.skipped > 0 {
            log::warn!("{}: skipped {} lines without 3 columns", path.display(), src.skipped);
        }
        Ok(src)
    }

    pub fn nell_values_for_entity(&self, token: &str) -> &[String] {
        self.values
            .get(&token.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl KnowledgeSource for NellSource {
    fn retrieve(&self, token: &str) -> &[String] {
        self.nell_values_for_entity(token)
    }
}
