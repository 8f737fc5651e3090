//! The knowledge-augmented encoder-decoder: encoder LSTM, linear ec
//! predictor, decoder LSTM fed `[token embedding; encoder state; ec]` at every
//! step, the three-term objective, exact gradients, Adam and greedy decoding.

mod adam;
mod backward;
mod config;
mod forward;
mod generate;
mod params;

pub use adam::{adam_step, AdamHyper, AdamState};
pub use backward::backward;
pub use config::{EvalEcMode, Mode, ModelConfig, TrainEcFeed};
pub use forward::{
    decode_step, encode, forward_losses, predict_external_context, sequence_nll, DecodeCache,
    DecoderState, EncoderOutput, Example, ForwardCaches, LossBreakdown,
};
pub use generate::generate;
pub use params::{ExtEdParams, Gradients, Predictor};
