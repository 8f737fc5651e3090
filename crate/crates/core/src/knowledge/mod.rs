//! Offline knowledge snapshots and external context vectors.

mod context;
mod diagnostics;
mod ecfile;
mod sources;

pub use context::{
    draw_scale_factor, external_context_vector, scale_external_context, ExternalContextVector,
    SCALE_MEAN, SCALE_STD,
};
pub use diagnostics::{knowledge_diagnostics, DiagnosticsReport};
pub use ecfile::{ec_map, ec_records_to_string, read_ec_file, write_ec_file, EcMap, EcRecord};
pub use sources::{KnowledgeSource, NellSource, WikiSummarySource};
