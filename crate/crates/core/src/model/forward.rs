use serde::{Deserialize, Serialize};

use super::{EvalEcMode, ExtEdParams, ModelConfig, TrainEcFeed};
use crate::error::{Error, Result};
use crate::knowledge::ExternalContextVector;
use crate::numeric::{lstm_cell_forward, softmax_cross_entropy};
use crate::vocab::{EOS, SOS};
use crate::{LstmCache, Matrix};

/// A dialogue pair after vocabulary lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub context: Vec<usize>,
    pub response: Vec<usize>,
}

impl Example {
    pub fn new(context: Vec<usize>, response: Vec<usize>) -> Self {
        Self { context, response }
    }

    /// Predicted positions: every response token plus the closing EOS.
    pub fn target_count(&self) -> usize {
        self.response.len() + 1
    }
}

/// Per-example objective terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Summed next-token negative log-likelihood, in nats.
    #[serde(rename = "L1")]
    pub l1: f64,
    /// Euclidean distance between predicted and knowledge-derived ec.
    #[serde(rename = "L2")]
    pub l2: f64,
    /// Minus the capped mean cross-entropy of the zero-ec decoding pass.
    #[serde(rename = "L3")]
    pub l3: f64,
    pub total: f64,
    pub tokens: usize,
}

#[derive(Clone, Debug)]
pub struct EncoderOutput {
    pub h: Matrix,
    pub c: Matrix,
    pub ids: Vec<usize>,
    pub caches: Vec<LstmCache>,
}

#[derive(Clone, Debug)]
pub struct DecoderState {
    pub h: Matrix,
    pub c: Matrix,
}

/// What one decoder step needs for backward.
#[derive(Clone, Debug)]
pub struct DecodeCache {
    pub prev_id: usize,
    pub lstm: LstmCache,
    pub h: Matrix,
}

/// A teacher-forced decoder unroll.
#[derive(Clone, Debug)]
pub(crate) struct DecodePass {
    pub steps: Vec<DecodeCache>,
    /// `d nll_k / d logits_k` per step.
    pub dlogits: Vec<Matrix>,
    pub nll: f64,
}

/// Everything [`super::backward`] needs from a forward call.
#[derive(Clone, Debug)]
pub struct ForwardCaches {
    pub(crate) cfg: ModelConfig,
    pub(crate) encoder: EncoderOutput,
    pub(crate) ec_hat: Option<Matrix>,
    pub(crate) ec_true: Option<Matrix>,
    pub(crate) main: DecodePass,
    pub(crate) zero: Option<DecodePass>,
    /// Whether the divergence term is below its cap and weighted.
    pub(crate) l3_active: bool,
}

fn check_id(id: usize, vocab: usize) -> Result<()> {
    if id >= vocab {
        return Err(Error::Index { index: id, len: vocab });
    }
    Ok(())
}

fn embed(p: &ExtEdParams, id: usize) -> Matrix {
    Matrix::column(p.embedding.row(id))
}

/// Runs the encoder over `context_ids` from a zero state.
pub fn encode(p: &ExtEdParams, context_ids: &[usize]) -> Result<EncoderOutput> {
    if context_ids.is_empty() {
        return Err(Error::Input("empty context".into()));
    }
    let hs = p.encoder.hidden_size();
    let mut h = Matrix::zeros(hs, 1);
    let mut c = Matrix::zeros(hs, 1);
    let mut caches = Vec::with_capacity(context_ids.len());
    for &id in context_ids {
        check_id(id, p.embedding.rows())?;
        let (h2, c2, cache) = lstm_cell_forward(&embed(p, id), &h, &c, &p.encoder)?;
        h = h2;
        c = c2;
        caches.push(cache);
    }
    Ok(EncoderOutput {
        h,
        c,
        ids: context_ids.to_vec(),
        caches,
    })
}

/// Linear map from the encoder's final hidden state to the ec space.
pub fn predict_external_context(p: &ExtEdParams, h_final: &Matrix) -> Result<Matrix> {
    let f = p
        .predictor
        .as_ref()
        .ok_or_else(|| Error::Contract("vanilla model has no ec predictor".into()))?;
    if h_final.shape() != (f.weight.cols(), 1) {
        return Err(Error::Dimension {
            op: "predict_external_context",
            lhs: f.weight.shape(),
            rhs: h_final.shape(),
        });
    }
    f.weight.matmul(h_final)?.add(&f.bias)
}

impl DecoderState {
    /// The decoder starts from the encoder's final state.
    pub fn from_encoder(enc: &EncoderOutput) -> Self {
        Self {
            h: enc.h.clone(),
            c: enc.c.clone(),
        }
    }
}

/// One decoder step on input `[embedding(prev_id); h_enc; ec]`.
pub fn decode_step(
    p: &ExtEdParams,
    prev_id: usize,
    state: &DecoderState,
    h_enc: &Matrix,
    ec: Option<&Matrix>,
) -> Result<(Matrix, DecoderState, DecodeCache)> {
    check_id(prev_id, p.embedding.rows())?;
    let base = p.embedding.cols() + p.encoder.hidden_size();
    let slot = p.decoder.input_size().checked_sub(base).ok_or_else(|| {
        Error::Contract("decoder input narrower than embedding plus encoder state".into())
    })?;
    let emb = embed(p, prev_id);
    let input = match (slot, ec) {
        (0, Some(_)) => {
            return Err(Error::Contract("external context supplied to a vanilla decoder".into()))
        }
        (0, None) => Matrix::vstack(&[&emb, h_enc])?,
        (_, None) => return Err(Error::Contract("decoder expects an external context vector".into())),
        (d, Some(ec)) => {
            if ec.shape() != (d, 1) {
                return Err(Error::Dimension {
                    op: "decode_step ec",
                    lhs: ec.shape(),
                    rhs: (d, 1),
                });
            }
            Matrix::vstack(&[&emb, h_enc, ec])?
        }
    };
    let (h, c, lstm) = lstm_cell_forward(&input, &state.h, &state.c, &p.decoder)?;
    let logits = p.out_weight.matmul(&h)?.add(&p.out_bias)?;
    let cache = DecodeCache {
        prev_id,
        lstm,
        h: h.clone(),
    };
    Ok((logits, DecoderState { h, c }, cache))
}

/// Teacher-forced unroll: inputs `SOS, r_1..r_n`, targets `r_1..r_n, EOS`.
pub(crate) fn teacher_forced(
    p: &ExtEdParams,
    response: &[usize],
    enc: &EncoderOutput,
    ec: Option<&Matrix>,
) -> Result<DecodePass> {
    let mut state = DecoderState::from_encoder(enc);
    let n = response.len() + 1;
    let mut steps = Vec::with_capacity(n);
    let mut dlogits = Vec::with_capacity(n);
    let mut nll = 0.0;
    for k in 0..n {
        let prev = if k == 0 { SOS } else { response[k - 1] };
        let target = if k < response.len() { response[k] } else { EOS };
        let (logits, next, cache) = decode_step(p, prev, &state, &enc.h, ec)?;
        let (loss, grad) = softmax_cross_entropy(&logits, target)?;
        nll += loss;
        steps.push(cache);
        dlogits.push(grad);
        state = next;
    }
    Ok(DecodePass { steps, dlogits, nll })
}

fn ec_matrix(ec: &ExternalContextVector, dim: usize) -> Result<Matrix> {
    if ec.dim() != dim {
        return Err(Error::Dimension {
            op: "external context",
            lhs: (ec.dim(), 1),
            rhs: (dim, 1),
        });
    }
    Ok(Matrix::column(&ec.values))
}

fn check_example(ex: &Example, cfg: &ModelConfig) -> Result<()> {
    if ex.context.is_empty() || ex.response.is_empty() {
        return Err(Error::Input("pair needs a nonempty context and response".into()));
    }
    for &id in ex.context.iter().chain(&ex.response) {
        check_id(id, cfg.vocab_size)?;
    }
    Ok(())
}

/// Computes `L1`, `L2`, `L3` and the weighted total for one pair.
///
/// `L3` is `-min(H0, ln V)` where `H0` is the mean per-token cross-entropy of
/// a second decoder pass run with a zero external context. It is reported in
/// both external-context modes but only weighted in `ext_ed`.
pub fn forward_losses(
    p: &ExtEdParams,
    ex: &Example,
    ec_true: Option<&ExternalContextVector>,
    cfg: &ModelConfig,
) -> Result<(LossBreakdown, ForwardCaches)> {
    p.check_shapes(cfg)?;
    check_example(ex, cfg)?;
    let tokens = ex.target_count();
    let enc = encode(p, &ex.context)?;

    if !cfg.mode.uses_external_context() {
        let main = teacher_forced(p, &ex.response, &enc, None)?;
        let l1 = main.nll;
        let breakdown = LossBreakdown {
            l1,
            l2: 0.0,
            l3: 0.0,
            total: l1,
            tokens,
        };
        let caches = ForwardCaches {
            cfg: cfg.clone(),
            encoder: enc,
            ec_hat: None,
            ec_true: None,
            main,
            zero: None,
            l3_active: false,
        };
        return Ok((breakdown, caches));
    }

    let ec_true = ec_true.ok_or_else(|| {
        Error::Input(format!("{} mode needs a knowledge ec vector", cfg.mode.as_str()))
    })?;
    let ec_true = ec_matrix(ec_true, cfg.ec_dim)?;
    let ec_hat = predict_external_context(p, &enc.h)?;
    let feed = match cfg.train_ec_feed {
        TrainEcFeed::Predicted => &ec_hat,
        TrainEcFeed::True => &ec_true,
    };
    let main = teacher_forced(p, &ex.response, &enc, Some(feed))?;
    let l2 = ec_hat.sub(&ec_true)?.norm2();

    let zero_ec = Matrix::zeros(cfg.ec_dim, 1);
    let zero = teacher_forced(p, &ex.response, &enc, Some(&zero_ec))?;
    let h0 = zero.nll / tokens as f64;
    let cap = (cfg.vocab_size as f64).ln();
    let l3 = -h0.min(cap);
    let lambda3 = cfg.effective_lambda3();
    let l1 = main.nll;
    let total = l1 + cfg.effective_lambda2() * l2 + lambda3 * l3;

    let breakdown = LossBreakdown {
        l1,
        l2,
        l3,
        total,
        tokens,
    };
    let caches = ForwardCaches {
        cfg: cfg.clone(),
        encoder: enc,
        ec_hat: Some(ec_hat),
        ec_true: Some(ec_true),
        main,
        zero: Some(zero),
        l3_active: lambda3 > 0.0 && h0 < cap,
    };
    Ok((breakdown, caches))
}

/// Teacher-forced negative log-likelihood and target count for one pair,
/// with the decoder's external context chosen by `ec_mode`.
pub fn sequence_nll(
    p: &ExtEdParams,
    ex: &Example,
    ec_true: Option<&ExternalContextVector>,
    cfg: &ModelConfig,
    ec_mode: EvalEcMode,
) -> Result<(f64, usize)> {
    check_example(ex, cfg)?;
    let enc = encode(p, &ex.context)?;
    let ec = eval_ec(p, &enc, ec_true, cfg, ec_mode)?;
    let pass = teacher_forced(p, &ex.response, &enc, ec.as_ref())?;
    Ok((pass.nll, ex.target_count()))
}

/// The decoder's external context at evaluation time.
pub(crate) fn eval_ec(
    p: &ExtEdParams,
    enc: &EncoderOutput,
    ec_true: Option<&ExternalContextVector>,
    cfg: &ModelConfig,
    ec_mode: EvalEcMode,
) -> Result<Option<Matrix>> {
    if !cfg.mode.uses_external_context() {
        return Ok(None);
    }
    Ok(Some(match ec_mode {
        EvalEcMode::Predicted => predict_external_context(p, &enc.h)?,
        EvalEcMode::Oracle => {
            let ec = ec_true.ok_or_else(|| Error::Input("oracle ec mode needs a knowledge ec vector".into()))?;
            ec_matrix(ec, cfg.ec_dim)?
        }
        EvalEcMode::Zero => Matrix::zeros(cfg.ec_dim, 1),
    }))
}
