use serde::{Deserialize, Serialize};

use super::KnowledgeSource;
use crate::embedding::{EmbeddingTable, StopwordList};
use crate::error::{Error, Result};
use crate::numeric::{gaussian_sample, RngState};

/// Mean of the embeddings of the knowledge retrieved for one context,
/// optionally rescaled by a positive random factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalContextVector {
    pub values: Vec<f64>,
    pub n_ext_tokens: usize,
    pub scaled: bool,
    pub scale_factor: f64,
}

impl ExternalContextVector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            n_ext_tokens: 0,
            scaled: false,
            scale_factor: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Builds the external context vector for a tokenized context.
///
/// Non-stopword context tokens are visited in sorted order; each one's
/// retrieved tokens are visited in retrieval order, and those present in the
/// embedding table are summed and averaged. Tokens missing from the table do
/// not count. With nothing embedded the result is the zero vector with
/// `n_ext_tokens == 0`.
pub fn external_context_vector(
    context: &[String],
    source: &dyn KnowledgeSource,
    embeddings: &EmbeddingTable,
    stopwords: &StopwordList,
) -> ExternalContextVector {
    let dim = embeddings.dim();
    let mut keys: Vec<&str> = context
        .iter()
        .map(String::as_str)
        .filter(|t| !stopwords.contains(t))
        .collect();
    keys.sort_unstable();

    let mut sum = vec![0.0; dim];
    let mut n = 0usize;
    for key in keys {
        for tok in source.retrieve(key) {
            if let Some(v) = embeddings.lookup(tok) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                n += 1;
            }
        }
    }
    if n == 0 {
        return ExternalContextVector::zeros(dim);
    }
    let denom = n as f64;
    ExternalContextVector {
        values: sum.into_iter().map(|s| s / denom).collect(),
        n_ext_tokens: n,
        scaled: false,
        scale_factor: 1.0,
    }
}

pub const SCALE_MEAN: f64 = 4.0;
pub const SCALE_STD: f64 = 1.0;

/// Draws `s ~ N(4, 1)` conditioned on `s > 0` (by resampling).
pub fn draw_scale_factor(rng: &mut RngState) -> f64 {
    loop {
        let s = gaussian_sample(rng, SCALE_MEAN, SCALE_STD);
        if s > 0.0 {
            return s;
        }
    }
}

/// Multiplies a vector by one positive `N(4, 1)` draw. Zero vectors are
/// returned unchanged without consuming randomness.
pub fn scale_external_context(ec: &ExternalContextVector, rng: &mut RngState) -> Result<ExternalContextVector> {
    if ec.scaled {
        return Err(Error::Contract("external context vector is already scaled".into()));
    }
    if ec.n_ext_tokens == 0 || ec.is_zero() {
        return Ok(ec.clone());
    }
    let s = draw_scale_factor(rng);
    Ok(ExternalContextVector {
        values: ec.values.iter().map(|v| v * s).collect(),
        n_ext_tokens: ec.n_ext_tokens,
        scaled: true,
        scale_factor: s,
    })
}
