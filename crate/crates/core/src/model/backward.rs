use super::forward::{DecodePass, ForwardCaches};
use super::{ExtEdParams, Gradients, ModelConfig, TrainEcFeed};
use crate::error::{Error, Result};
use crate::numeric::lstm_cell_backward_into;
use crate::Matrix;

/// Gradients leaving a decoder unroll toward its inputs.
struct DecoderInputGrads {
    h0: Matrix,
    c0: Matrix,
    h_enc: Matrix,
    ec: Option<Matrix>,
}

/// Backpropagates `weight * sum_k nll_k` through one decoder unroll.
fn decoder_backward(
    p: &ExtEdParams,
    pass: &DecodePass,
    weight: f64,
    grads: &mut Gradients,
) -> Result<DecoderInputGrads> {
    let e = p.embedding.cols();
    let hs = p.encoder.hidden_size();
    let slot = p.decoder.input_size() - e - hs;

    let mut dh_next = Matrix::zeros(hs, 1);
    let mut dc_next = Matrix::zeros(hs, 1);
    let mut d_henc = Matrix::zeros(hs, 1);
    let mut d_ec = (slot > 0).then(|| Matrix::zeros(slot, 1));

    for (step, dlogits) in pass.steps.iter().zip(&pass.dlogits).rev() {
        let dl = dlogits.scale(weight);
        grads.out_weight.add_outer(&dl, &step.h, 1.0)?;
        grads.out_bias.add_assign(&dl)?;
        let mut dh = p.out_weight.matmul_tn(&dl)?;
        dh.add_assign(&dh_next)?;

        let g = lstm_cell_backward_into(&step.lstm, &dh, &dc_next, &p.decoder, &mut grads.decoder)?;
        let dx = g.dx.data();
        for (acc, d) in grads.embedding.row_mut(step.prev_id).iter_mut().zip(&dx[..e]) {
            *acc += d;
        }
        for (acc, d) in d_henc.data_mut().iter_mut().zip(&dx[e..e + hs]) {
            *acc += d;
        }
        if let Some(d_ec) = d_ec.as_mut() {
            for (acc, d) in d_ec.data_mut().iter_mut().zip(&dx[e + hs..]) {
                *acc += d;
            }
        }
        dh_next = g.dh_prev;
        dc_next = g.dc_prev;
    }
    Ok(DecoderInputGrads {
        h0: dh_next,
        c0: dc_next,
        h_enc: d_henc,
        ec: d_ec,
    })
}

/// Exact gradient of `LossBreakdown::total` with respect to every parameter.
///
/// Covers the ec-fed decoder pass, the zero-ec pass when the divergence term
/// is active (below its `ln V` cap), the `L2` path into the predictor, and
/// BPTT through the encoder, which receives gradient from the decoder's
/// initial state, from the `h_enc` slot of every decoder input, and from the
/// predictor.
pub fn backward(p: &ExtEdParams, caches: &ForwardCaches, cfg: &ModelConfig) -> Result<Gradients> {
    if &caches.cfg != cfg {
        return Err(Error::Contract("caches were produced under a different config".into()));
    }
    p.check_shapes(cfg)?;
    if caches.encoder.h.rows() != cfg.hidden_dim {
        return Err(Error::Contract("caches do not match the parameter shapes".into()));
    }

    let mut grads = p.zeros_like();
    let main = decoder_backward(p, &caches.main, 1.0, &mut grads)?;
    let mut d_henc = main.h0;
    d_henc.add_assign(&main.h_enc)?;
    let mut d_cenc = main.c0;

    if cfg.mode.uses_external_context() {
        let (ec_hat, ec_true) = match (&caches.ec_hat, &caches.ec_true) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Contract("external context caches missing".into())),
        };
        let mut d_ec_hat = Matrix::zeros(cfg.ec_dim, 1);
        if cfg.train_ec_feed == TrainEcFeed::Predicted {
            if let Some(d) = &main.ec {
                d_ec_hat.add_assign(d)?;
            }
        }

        let lambda2 = cfg.effective_lambda2();
        if lambda2 > 0.0 {
            let diff = ec_hat.sub(ec_true)?;
            let norm = diff.norm2();
            // subgradient 0 at the kink
            if norm > 0.0 {
                d_ec_hat.add_scaled(&diff, lambda2 / norm)?;
            }
        }

        if caches.l3_active {
            let zero = caches
                .zero
                .as_ref()
                .ok_or_else(|| Error::Contract("zero-ec pass missing from caches".into()))?;
            let weight = -cfg.effective_lambda3() / zero.steps.len() as f64;
            let z = decoder_backward(p, zero, weight, &mut grads)?;
            d_henc.add_assign(&z.h0)?;
            d_henc.add_assign(&z.h_enc)?;
            d_cenc.add_assign(&z.c0)?;
        }

        let f = p.predictor.as_ref().expect("shape check guarantees a predictor");
        let gf = grads.predictor.as_mut().expect("gradients mirror parameters");
        gf.weight.add_outer(&d_ec_hat, &caches.encoder.h, 1.0)?;
        gf.bias.add_assign(&d_ec_hat)?;
        d_henc.add_assign(&f.weight.matmul_tn(&d_ec_hat)?)?;
    }

    let (mut dh, mut dc) = (d_henc, d_cenc);
    for (cache, &id) in caches.encoder.caches.iter().zip(&caches.encoder.ids).rev() {
        let g = lstm_cell_backward_into(cache, &dh, &dc, &p.encoder, &mut grads.encoder)?;
        for (acc, d) in grads.embedding.row_mut(id).iter_mut().zip(g.dx.data()) {
            *acc += d;
        }
        dh = g.dh_prev;
        dc = g.dc_prev;
    }
    Ok(grads)
}
