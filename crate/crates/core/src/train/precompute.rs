use crate::embedding::{EmbeddingTable, StopwordList};
use crate::error::Result;
use crate::knowledge::{
    external_context_vector, knowledge_diagnostics, scale_external_context, DiagnosticsReport,
    EcRecord, ExternalContextVector, KnowledgeSource,
};
use crate::numeric::RngState;

use super::corpus::{check_unique_ids, DialoguePair};

/// Result of running knowledge retrieval over a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct EcPrecompute {
    /// One record per pair, in corpus order.
    pub records: Vec<EcRecord>,
    /// Pairs whose context retrieved no embedded knowledge.
    pub zero_vectors: usize,
    /// Spread of the final vectors; `None` for fewer than two pairs.
    pub diagnostics: Option<DiagnosticsReport>,
}

/// Builds (and optionally scales) the external context vector of every pair.
/// Scaling draws come from one stream seeded with `seed`, in corpus order.
pub fn precompute_ec(
    corpus: &[DialoguePair],
    source: &dyn KnowledgeSource,
    embeddings: &EmbeddingTable,
    stopwords: &StopwordList,
    scale: bool,
    seed: u64,
) -> Result<EcPrecompute> {
    check_unique_ids(corpus)?;
    let mut rng = RngState::new(seed);
    let mut vectors: Vec<ExternalContextVector> = Vec::with_capacity(corpus.len());
    for pair in corpus {
        let ec = external_context_vector(&pair.context, source, embeddings, stopwords);
        vectors.push(if scale { scale_external_context(&ec, &mut rng)? } else { ec });
    }
    let zero_vectors = vectors.iter().filter(|v| v.n_ext_tokens == 0).count();
    let diagnostics = if vectors.len() >= 2 {
        Some(knowledge_diagnostics(&vectors)?)
    } else {
        None
    };
    let records = corpus
        .iter()
        .zip(&vectors)
        .map(|(p, v)| EcRecord::new(p.id.clone(), v))
        .collect();
    Ok(EcPrecompute {
        records,
        zero_vectors,
        diagnostics,
    })
}
