use serde::{Deserialize, Serialize};

use super::{ExtEdParams, Gradients};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments shaped like the parameters, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: ExtEdParams,
    pub v: ExtEdParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ExtEdParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before anything is modified.
pub fn adam_step(
    params: &mut ExtEdParams,
    grads: &Gradients,
    state: &mut AdamState,
    hyper: &AdamHyper,
) -> Result<()> {
    let gt = grads.tensors();
    if let Some((name, _)) = gt.iter().find(|(_, g)| !g.is_finite()) {
        return Err(Error::Numeric(format!("gradient of {name}")));
    }
    if gt.len() != params.tensors().len() || gt.len() != state.m.tensors().len() {
        return Err(Error::Contract("gradient layout differs from parameters".into()));
    }

    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - hyper.beta1.powi(t);
    let c2 = 1.0 - hyper.beta2.powi(t);

    let mut pt = params.tensors_mut();
    let mut mt = state.m.tensors_mut();
    let mut vt = state.v.tensors_mut();
    for (k, (name, g)) in gt.iter().enumerate() {
        let (p, m, v) = (&mut pt[k].1, &mut mt[k].1, &mut vt[k].1);
        if p.shape() != g.shape() || m.shape() != g.shape() {
            return Err(Error::Contract(format!("{name}: gradient shaped unlike parameter")));
        }
        let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
        for (i, &gi) in g.data().iter().enumerate() {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * gi;
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
        }
    }
    Ok(())
}
