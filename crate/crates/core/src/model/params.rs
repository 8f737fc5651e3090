use crate::error::{Error, Result};
use crate::numeric::{glorot_init, RngState};
use crate::{LstmParams, Matrix};

use super::ModelConfig;

/// The external context predictor: `ec_hat = weight * h + bias`.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// All trainable tensors. `predictor` is `None` in vanilla mode.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtEdParams {
    pub embedding: Matrix,
    pub encoder: LstmParams,
    pub predictor: Option<Predictor>,
    pub decoder: LstmParams,
    pub out_weight: Matrix,
    pub out_bias: Matrix,
}

/// Gradients share the parameter layout.
pub type Gradients = ExtEdParams;

impl ExtEdParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let (v, e, h) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim);
        Self {
            embedding: Matrix::zeros(v, e),
            encoder: LstmParams::zeros(h, e),
            predictor: cfg.mode.uses_external_context().then(|| Predictor {
                weight: Matrix::zeros(cfg.ec_dim, h),
                bias: Matrix::zeros(cfg.ec_dim, 1),
            }),
            decoder: LstmParams::zeros(h, cfg.decoder_input_dim()),
            out_weight: Matrix::zeros(v, h),
            out_bias: Matrix::zeros(v, 1),
        }
    }

    /// Glorot-uniform weights and zero biases, drawn in checkpoint tensor order.
    pub fn init(cfg: &ModelConfig, rng: &mut RngState) -> Self {
        let (v, e, h) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim);
        let embedding = glorot_init(rng, v, e);
        let encoder = LstmParams::glorot(rng, h, e);
        let predictor = cfg.mode.uses_external_context().then(|| Predictor {
            weight: glorot_init(rng, cfg.ec_dim, h),
            bias: Matrix::zeros(cfg.ec_dim, 1),
        });
        let decoder = LstmParams::glorot(rng, h, cfg.decoder_input_dim());
        let out_weight = glorot_init(rng, v, h);
        Self {
            embedding,
            encoder,
            predictor,
            decoder,
            out_weight,
            out_bias: Matrix::zeros(v, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            embedding: z(&self.embedding),
            encoder: LstmParams {
                w_x: z(&self.encoder.w_x),
                w_h: z(&self.encoder.w_h),
                b: z(&self.encoder.b),
            },
            predictor: self.predictor.as_ref().map(|p| Predictor {
                weight: z(&p.weight),
                bias: z(&p.bias),
            }),
            decoder: LstmParams {
                w_x: z(&self.decoder.w_x),
                w_h: z(&self.decoder.w_h),
                b: z(&self.decoder.b),
            },
            out_weight: z(&self.out_weight),
            out_bias: z(&self.out_bias),
        }
    }

    /// Tensors in the fixed serialization order: embedding, encoder
    /// `W_x, W_h, b`, predictor weight and bias (when present), decoder
    /// `W_x, W_h, b`, projection weight and bias.
    pub fn tensors(&self) -> Vec<(&'static str, &Matrix)> {
        let mut out = vec![
            ("embedding", &self.embedding),
            ("encoder.w_x", &self.encoder.w_x),
            ("encoder.w_h", &self.encoder.w_h),
            ("encoder.b", &self.encoder.b),
        ];
        if let Some(p) = &self.predictor {
            out.push(("f.weight", &p.weight));
            out.push(("f.bias", &p.bias));
        }
        out.extend([
            ("decoder.w_x", &self.decoder.w_x),
            ("decoder.w_h", &self.decoder.w_h),
            ("decoder.b", &self.decoder.b),
            ("out.weight", &self.out_weight),
            ("out.bias", &self.out_bias),
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix)> {
        let mut out = vec![
            ("embedding", &mut self.embedding),
            ("encoder.w_x", &mut self.encoder.w_x),
            ("encoder.w_h", &mut self.encoder.w_h),
            ("encoder.b", &mut self.encoder.b),
        ];
        if let Some(p) = &mut self.predictor {
            out.push(("f.weight", &mut p.weight));
            out.push(("f.bias", &mut p.bias));
        }
        out.extend([
            ("decoder.w_x", &mut self.decoder.w_x),
            ("decoder.w_h", &mut self.decoder.w_h),
            ("decoder.b", &mut self.decoder.b),
            ("out.weight", &mut self.out_weight),
            ("out.bias", &mut self.out_bias),
        ]);
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    /// Tensor shapes `cfg` implies, in serialization order.
    pub fn expected_shapes(cfg: &ModelConfig) -> Vec<(usize, usize)> {
        let (v, e, h, d) = (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.ec_dim);
        let mut out = vec![(v, e), (4 * h, e), (4 * h, h), (4 * h, 1)];
        if cfg.mode.uses_external_context() {
            out.extend([(d, h), (d, 1)]);
        }
        out.extend([(4 * h, cfg.decoder_input_dim()), (4 * h, h), (4 * h, 1), (v, h), (v, 1)]);
        out
    }

    /// Checks every tensor against the shapes `cfg` implies.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let have = self.tensors();
        let need = Self::expected_shapes(cfg);
        if have.len() != need.len() {
            return Err(Error::Contract(format!(
                "parameters hold {} tensors, config {} expects {}",
                have.len(),
                cfg.mode.as_str(),
                need.len()
            )));
        }
        for ((name, a), &b) in have.iter().zip(&need) {
            if a.shape() != b {
                return Err(Error::Dimension {
                    op: name,
                    lhs: a.shape(),
                    rhs: b,
                });
            }
        }
        Ok(())
    }
}
