use super::forward::{encode, eval_ec, DecoderState};
use super::{decode_step, ExtEdParams, ModelConfig};
use crate::error::{Error, Result};
use crate::knowledge::ExternalContextVector;
use crate::vocab::{EOS, SOS};

/// Greedy decoding from SOS, with the external context chosen by
/// `cfg.eval_ec_mode`. Stops after EOS (not included) or `max_len` tokens.
/// Ties in the argmax go to the lowest id.
pub fn generate(
    p: &ExtEdParams,
    context_ids: &[usize],
    max_len: usize,
    cfg: &ModelConfig,
    ec_true: Option<&ExternalContextVector>,
) -> Result<Vec<usize>> {
    if max_len == 0 {
        return Err(Error::Input("max_len must be at least 1".into()));
    }
    let enc = encode(p, context_ids)?;
    let ec = eval_ec(p, &enc, ec_true, cfg, cfg.eval_ec_mode)?;
    let mut state = DecoderState::from_encoder(&enc);
    let mut prev = SOS;
    let mut out = Vec::with_capacity(max_len);
    while out.len() < max_len {
        let (logits, next, _) = decode_step(p, prev, &state, &enc.h, ec.as_ref())?;
        let id = logits.argmax();
        if id == EOS {
            break;
        }
        out.push(id);
        prev = id;
        state = next;
    }
    Ok(out)
}
