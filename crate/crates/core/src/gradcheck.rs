//! Finite-difference verification of the model's analytic gradients on
//! random small configurations.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::knowledge::ExternalContextVector;
use crate::model::{
    backward, forward_losses, Example, ExtEdParams, Mode, ModelConfig, TrainEcFeed,
};
use crate::numeric::{finite_diff_grad, relative_error, RngState};
use crate::Matrix;

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
/// Below this magnitude relative error is measured against the floor.
pub const FD_FLOOR: f64 = 1e-5;

/// Outcome of checking one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub mode: Mode,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub ec_dim: usize,
    pub n_params: usize,
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub passed: bool,
}

/// A random configuration within `V<=12, E<=6, H<=8, D_ec<=5`.
pub fn random_small_config(rng: &mut RngState, mode: Mode) -> ModelConfig {
    ModelConfig {
        vocab_size: rng.gen_range(5..=12),
        embed_dim: rng.gen_range(1..=6),
        hidden_dim: rng.gen_range(1..=8),
        ec_dim: rng.gen_range(1..=5),
        lambda2: rng.gen_range(0.2..2.0),
        lambda3: rng.gen_range(0.2..2.0),
        mode,
        train_ec_feed: if rng.gen_bool(0.5) {
            TrainEcFeed::Predicted
        } else {
            TrainEcFeed::True
        },
        ..Default::default()
    }
}

/// Random pairs with 1..=4 token contexts and responses plus random ec vectors.
pub fn random_toy_corpus(
    rng: &mut RngState,
    cfg: &ModelConfig,
    n: usize,
) -> Vec<(Example, ExternalContextVector)> {
    (0..n)
        .map(|_| {
            let seq = |rng: &mut RngState| {
                let len = rng.gen_range(1..=4);
                (0..len).map(|_| rng.gen_range(0..cfg.vocab_size)).collect::<Vec<_>>()
            };
            let ex = Example::new(seq(rng), seq(rng));
            let ec = ExternalContextVector {
                values: (0..cfg.ec_dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                n_ext_tokens: 1,
                scaled: false,
                scale_factor: 1.0,
            };
            (ex, ec)
        })
        .collect()
}

/// Random parameters: Glorot weights plus nonzero random biases.
pub fn random_params(rng: &mut RngState, cfg: &ModelConfig) -> ExtEdParams {
    let mut p = ExtEdParams::init(cfg, rng);
    let mut jitter = |m: &mut Matrix| m.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
    jitter(&mut p.encoder.b);
    jitter(&mut p.decoder.b);
    jitter(&mut p.out_bias);
    if let Some(f) = p.predictor.as_mut() {
        jitter(&mut f.bias);
    }
    p
}

/// Summed total loss over a corpus.
pub fn corpus_total(
    p: &ExtEdParams,
    corpus: &[(Example, ExternalContextVector)],
    cfg: &ModelConfig,
) -> Result<f64> {
    let mut total = 0.0;
    for (ex, ec) in corpus {
        total += forward_losses(p, ex, Some(ec), cfg)?.0.total;
    }
    Ok(total)
}

/// Analytic gradient of [`corpus_total`].
pub fn corpus_gradients(
    p: &ExtEdParams,
    corpus: &[(Example, ExternalContextVector)],
    cfg: &ModelConfig,
) -> Result<ExtEdParams> {
    let mut acc = p.zeros_like();
    for (ex, ec) in corpus {
        let (_, caches) = forward_losses(p, ex, Some(ec), cfg)?;
        let g = backward(p, &caches, cfg)?;
        for ((_, a), (_, b)) in acc.tensors_mut().into_iter().zip(g.tensors()) {
            a.add_assign(b)?;
        }
    }
    Ok(acc)
}

/// Whether a central difference with step `FD_EPS` could straddle a kink:
/// the `ln V` cap on the divergence term or the zero of the `L2` norm.
pub fn near_kink(p: &ExtEdParams, corpus: &[(Example, ExternalContextVector)], cfg: &ModelConfig) -> Result<bool> {
    if !cfg.mode.uses_external_context() {
        return Ok(false);
    }
    let cap = (cfg.vocab_size as f64).ln();
    for (ex, ec) in corpus {
        let (b, _) = forward_losses(p, ex, Some(ec), cfg)?;
        if (-b.l3 - cap).abs() < 1e-3 || b.l2 < 1e-3 {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Compares every analytic gradient entry against central differences.
pub fn check_gradients(
    p: &ExtEdParams,
    corpus: &[(Example, ExternalContextVector)],
    cfg: &ModelConfig,
) -> Result<GradCheckReport> {
    let analytic = corpus_gradients(p, corpus, cfg)?;
    let names: Vec<&'static str> = p.tensors().iter().map(|(n, _)| *n).collect();
    let mut worst = (0.0f64, String::new());
    for (k, name) in names.iter().enumerate() {
        let original = p.tensors()[k].1.clone();
        let mut probe = p.clone();
        let fd = finite_diff_grad(
            |m| {
                *probe.tensors_mut()[k].1 = m.clone();
                corpus_total(&probe, corpus, cfg).expect("forward succeeds on perturbed params")
            },
            &original,
            FD_EPS,
        )?;
        let an = analytic.tensors()[k].1;
        for (a, b) in fd.data().iter().zip(an.data()) {
            let e = relative_error(*a, *b, FD_FLOOR);
            if e > worst.0 || worst.1.is_empty() {
                worst = (e, name.to_string());
            }
        }
    }
    Ok(GradCheckReport {
        mode: cfg.mode,
        vocab_size: cfg.vocab_size,
        embed_dim: cfg.embed_dim,
        hidden_dim: cfg.hidden_dim,
        ec_dim: cfg.ec_dim,
        n_params: p.num_parameters(),
        max_rel_error: worst.0,
        worst_tensor: worst.1,
        passed: worst.0 < FD_TOLERANCE,
    })
}

/// Checks `n_configs` random configurations, cycling through all three modes.
pub fn run_gradcheck(seed: u64, n_configs: usize) -> Result<Vec<GradCheckReport>> {
    let modes = [Mode::Vanilla, Mode::ExtEd, Mode::ExtEdMinusL3];
    let mut rng = RngState::new(seed);
    let mut out = Vec::with_capacity(n_configs);
    for i in 0..n_configs {
        let cfg = random_small_config(&mut rng, modes[i % modes.len()]);
        let corpus = random_toy_corpus(&mut rng, &cfg, 2);
        let mut p = random_params(&mut rng, &cfg);
        while near_kink(&p, &corpus, &cfg)? {
            p = random_params(&mut rng, &cfg);
        }
        out.push(check_gradients(&p, &corpus, &cfg)?);
    }
    Ok(out)
}
