//! Corpus loading, ec precomputation, the training loop, checkpoints,
//! metrics and evaluation.

mod checkpoint;
mod corpus;
mod eval;
mod metrics;
mod precompute;
mod trainer;

pub use checkpoint::{load_checkpoint, load_checkpoint_for, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC};
pub use corpus::{check_unique_ids, load_corpus, CorpusLoad, DialoguePair};
pub use eval::{bleu4, corpus_bleu4, evaluate_report, perplexity, report_csv, ReportEntry, ReportRow};
pub use metrics::{EpochRecord, MetricsLog, StepRecord};
pub use precompute::{precompute_ec, EcPrecompute};
pub use trainer::{resume, split_by_id, train, TrainOptions, Trainer};

use crate::error::{Error, Result};
use crate::knowledge::{EcMap, ExternalContextVector};
use crate::model::Example;
use crate::vocab::Vocabulary;

/// A pair mapped to ids, with its knowledge ec when one is known.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedPair {
    pub id: String,
    pub example: Example,
    pub ec: Option<ExternalContextVector>,
}

/// Maps tokens to ids. The ec comes from `ec_map` when given, otherwise from
/// the pair itself.
pub fn encode_pairs(pairs: &[DialoguePair], vocab: &Vocabulary, ec_map: Option<&EcMap>) -> Vec<EncodedPair> {
    pairs
        .iter()
        .map(|p| EncodedPair {
            id: p.id.clone(),
            example: Example::new(vocab.encode(&p.context), vocab.encode(&p.response)),
            ec: match ec_map {
                Some(m) => m.get(&p.id).cloned(),
                None => p.ec.clone(),
            },
        })
        .collect()
}

pub(crate) fn check_unique_encoded_ids(pairs: &[EncodedPair]) -> Result<()> {
    let mut seen = std::collections::HashSet::with_capacity(pairs.len());
    for p in pairs {
        if !seen.insert(p.id.as_str()) {
            return Err(Error::Input(format!("duplicate pair id {:?}", p.id)));
        }
    }
    Ok(())
}
