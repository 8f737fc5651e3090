use serde::{Deserialize, Serialize};

use super::{glorot_init, Matrix, RngState, Scalar};
use crate::error::{Error, Result};

/// Weights of one LSTM cell.
///
/// The `4H` rows of every tensor are laid out as four `H`-row gate blocks in
/// the fixed order input, forget, output, candidate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams<T> {
    pub w_x: Matrix<T>,
    pub w_h: Matrix<T>,
    pub b: Matrix<T>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w_x: Matrix::zeros(4 * hidden, input),
            w_h: Matrix::zeros(4 * hidden, hidden),
            b: Matrix::zeros(4 * hidden, 1),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(rng: &mut RngState, hidden: usize, input: usize) -> Self {
        Self {
            w_x: glorot_init(rng, 4 * hidden, input),
            w_h: glorot_init(rng, 4 * hidden, hidden),
            b: Matrix::zeros(4 * hidden, 1),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w_h.cols()
    }

    pub fn input_size(&self) -> usize {
        self.w_x.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.w_h.cols();
        let expect = |op, m: &Matrix<T>, shape: (usize, usize)| {
            if m.shape() != shape {
                Err(Error::Dimension {
                    op,
                    lhs: m.shape(),
                    rhs: shape,
                })
            } else {
                Ok(())
            }
        };
        expect("lstm W_h", &self.w_h, (4 * h, h))?;
        expect("lstm W_x", &self.w_x, (4 * h, self.w_x.cols()))?;
        expect("lstm b", &self.b, (4 * h, 1))
    }
}

/// Intermediates of one forward step, consumed by [`lstm_cell_backward`].
#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    pub x: Matrix<T>,
    pub h_prev: Matrix<T>,
    pub c_prev: Matrix<T>,
    pub i: Matrix<T>,
    pub f: Matrix<T>,
    pub o: Matrix<T>,
    pub g: Matrix<T>,
    pub c: Matrix<T>,
    pub tanh_c: Matrix<T>,
}

/// Gradients produced by one backward step.
#[derive(Clone, Debug)]
pub struct LstmStepGrads<T> {
    pub dx: Matrix<T>,
    pub dh_prev: Matrix<T>,
    pub dc_prev: Matrix<T>,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

fn check_column<T: Scalar>(op: &'static str, m: &Matrix<T>, rows: usize) -> Result<()> {
    if m.shape() != (rows, 1) {
        return Err(Error::Dimension {
            op,
            lhs: m.shape(),
            rhs: (rows, 1),
        });
    }
    Ok(())
}

/// One LSTM step from `(h_prev, c_prev)` on input `x`.
pub fn lstm_cell_forward<T: Scalar>(
    x: &Matrix<T>,
    h_prev: &Matrix<T>,
    c_prev: &Matrix<T>,
    p: &LstmParams<T>,
) -> Result<(Matrix<T>, Matrix<T>, LstmCache<T>)> {
    let hs = p.hidden_size();
    check_column("lstm input", x, p.input_size())?;
    check_column("lstm h_prev", h_prev, hs)?;
    check_column("lstm c_prev", c_prev, hs)?;

    let mut z = p.w_x.matmul(x)?;
    z.add_assign(&p.w_h.matmul(h_prev)?)?;
    z.add_assign(&p.b)?;
    let zd = z.data();

    let gate = |k: usize, act: fn(T) -> T| {
        Matrix::column(&zd[k * hs..(k + 1) * hs].iter().map(|&v| act(v)).collect::<Vec<_>>())
    };
    let i = gate(0, sigmoid);
    let f = gate(1, sigmoid);
    let o = gate(2, sigmoid);
    let g = gate(3, |v: T| v.tanh());

    let c = Matrix::column(
        &(0..hs)
            .map(|k| f.data()[k] * c_prev.data()[k] + i.data()[k] * g.data()[k])
            .collect::<Vec<_>>(),
    );
    let tanh_c = c.map(|v| v.tanh());
    let h = o.hadamard(&tanh_c)?;

    let cache = LstmCache {
        x: x.clone(),
        h_prev: h_prev.clone(),
        c_prev: c_prev.clone(),
        i,
        f,
        o,
        g,
        c: c.clone(),
        tanh_c,
    };
    Ok((h, c, cache))
}

/// Backward step that accumulates parameter gradients into `grads`.
pub fn lstm_cell_backward_into<T: Scalar>(
    cache: &LstmCache<T>,
    dh: &Matrix<T>,
    dc: &Matrix<T>,
    p: &LstmParams<T>,
    grads: &mut LstmParams<T>,
) -> Result<LstmStepGrads<T>> {
    let hs = p.hidden_size();
    if cache.i.rows() != hs || cache.x.rows() != p.input_size() {
        return Err(Error::Contract(format!(
            "cache for a {}x{} cell used with a {}x{} cell",
            cache.i.rows(),
            cache.x.rows(),
            hs,
            p.input_size()
        )));
    }
    if grads.w_x.shape() != p.w_x.shape() || grads.w_h.shape() != p.w_h.shape() {
        return Err(Error::Contract(
            "gradient accumulator shaped unlike the cell parameters".into(),
        ));
    }
    check_column("lstm dh", dh, hs)?;
    check_column("lstm dc", dc, hs)?;

    let one = T::one();
    let mut dz = vec![T::zero(); 4 * hs];
    let mut dc_prev = vec![T::zero(); hs];
    for k in 0..hs {
        let (i, f, o, g) = (
            cache.i.data()[k],
            cache.f.data()[k],
            cache.o.data()[k],
            cache.g.data()[k],
        );
        let tc = cache.tanh_c.data()[k];
        let dh_k = dh.data()[k];
        let d_o = dh_k * tc;
        let dc_total = dc.data()[k] + dh_k * o * (one - tc * tc);
        let d_i = dc_total * g;
        let d_g = dc_total * i;
        let d_f = dc_total * cache.c_prev.data()[k];
        dc_prev[k] = dc_total * f;
        dz[k] = d_i * i * (one - i);
        dz[hs + k] = d_f * f * (one - f);
        dz[2 * hs + k] = d_o * o * (one - o);
        dz[3 * hs + k] = d_g * (one - g * g);
    }
    let dz = Matrix::column(&dz);

    grads.w_x.add_outer(&dz, &cache.x, one)?;
    grads.w_h.add_outer(&dz, &cache.h_prev, one)?;
    grads.b.add_assign(&dz)?;

    Ok(LstmStepGrads {
        dx: p.w_x.matmul_tn(&dz)?,
        dh_prev: p.w_h.matmul_tn(&dz)?,
        dc_prev: Matrix::column(&dc_prev),
    })
}

/// Exact gradients of one LSTM step given upstream `dh`, `dc`.
pub fn lstm_cell_backward<T: Scalar>(
    cache: &LstmCache<T>,
    dh: &Matrix<T>,
    dc: &Matrix<T>,
    p: &LstmParams<T>,
) -> Result<(LstmStepGrads<T>, LstmParams<T>)> {
    let mut grads = LstmParams::zeros(p.hidden_size(), p.input_size());
    let step = lstm_cell_backward_into(cache, dh, dc, p, &mut grads)?;
    Ok((step, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::finite_diff_grad;
    use rand::Rng;

    fn rand_col(rng: &mut RngState, n: usize) -> Matrix<f64> {
        Matrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn rand_params(rng: &mut RngState, h: usize, e: usize) -> LstmParams<f64> {
        LstmParams {
            w_x: Matrix::from_fn(4 * h, e, |_, _| rng.gen_range(-1.0..1.0)),
            w_h: Matrix::from_fn(4 * h, h, |_, _| rng.gen_range(-1.0..1.0)),
            b: Matrix::from_fn(4 * h, 1, |_, _| rng.gen_range(-1.0..1.0)),
        }
    }

    /// Scalar-by-scalar reference cell, written independently of the matrix path.
    fn scalar_cell(
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
        p: &LstmParams<f64>,
    ) -> (Vec<f64>, Vec<f64>) {
        let hs = h_prev.len();
        let pre = |row: usize| {
            let mut s = 0.0;
            for (j, xv) in x.iter().enumerate() {
                s += p.w_x[(row, j)] * xv;
            }
            let mut t = 0.0;
            for (j, hv) in h_prev.iter().enumerate() {
                t += p.w_h[(row, j)] * hv;
            }
            s + t + p.b[(row, 0)]
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h = vec![0.0; hs];
        let mut c = vec![0.0; hs];
        for k in 0..hs {
            let i = sig(pre(k));
            let f = sig(pre(hs + k));
            let o = sig(pre(2 * hs + k));
            let g = pre(3 * hs + k).tanh();
            c[k] = f * c_prev[k] + i * g;
            h[k] = o * c[k].tanh();
        }
        (h, c)
    }

    #[test]
    fn zero_parameters_zero_state() {
        let p = LstmParams::<f64>::zeros(3, 2);
        let z3 = Matrix::zeros(3, 1);
        let (h, c, cache) = lstm_cell_forward(&Matrix::column(&[0.7, -1.2]), &z3, &z3, &p).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
        assert!(c.data().iter().all(|&v| v == 0.0));
        assert!(cache.i.data().iter().all(|&v| v == 0.5));
        assert!(cache.g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_parameters_carry_half_the_cell() {
        let p = LstmParams::<f64>::zeros(2, 2);
        let v = Matrix::column(&[1.5, -0.4]);
        let (h, c, _) =
            lstm_cell_forward(&Matrix::column(&[0.3, 0.1]), &Matrix::zeros(2, 1), &v, &p).unwrap();
        for k in 0..2 {
            assert_eq!(c.data()[k], 0.5 * v.data()[k]);
            assert_eq!(h.data()[k], 0.5 * (0.5 * v.data()[k]).tanh());
        }
    }

    #[test]
    fn zero_parameters_in_single_precision() {
        let p = LstmParams::<f32>::zeros(2, 3);
        let z = Matrix::zeros(2, 1);
        let (h, _, _) = lstm_cell_forward(&Matrix::column(&[1.0f32, 2.0, 3.0]), &z, &z, &p).unwrap();
        assert_eq!(h.data(), &[0.0f32, 0.0]);
    }

    #[test]
    fn matches_scalar_oracle() {
        let mut rng = RngState::new(11);
        for _ in 0..20 {
            let (hs, e) = (rng.gen_range(1..6), rng.gen_range(1..5));
            let p = rand_params(&mut rng, hs, e);
            let x = rand_col(&mut rng, e);
            let h0 = rand_col(&mut rng, hs);
            let c0 = rand_col(&mut rng, hs);
            let (h, c, _) = lstm_cell_forward(&x, &h0, &c0, &p).unwrap();
            let (hw, cw) = scalar_cell(x.data(), h0.data(), c0.data(), &p);
            for k in 0..hs {
                assert!((h.data()[k] - hw[k]).abs() < 1e-14);
                assert!((c.data()[k] - cw[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = RngState::new(5);
        let p = rand_params(&mut rng, 3, 2);
        let (_, _, cache) = lstm_cell_forward(
            &rand_col(&mut rng, 2),
            &rand_col(&mut rng, 3),
            &rand_col(&mut rng, 3),
            &p,
        )
        .unwrap();
        let z = Matrix::zeros(3, 1);
        let (step, grads) = lstm_cell_backward(&cache, &z, &z, &p).unwrap();
        for m in [&step.dx, &step.dh_prev, &step.dc_prev, &grads.w_x, &grads.w_h, &grads.b] {
            assert!(m.data().iter().all(|&v| v == 0.0));
        }
    }

    /// One unit, one input, dh = 1, dc = 0, with the derivative worked out by hand:
    /// h = σ(a_o)·tanh(σ(a_f)·c0 + σ(a_i)·tanh(a_g)) where a_k = w_k x + u_k h0 + b_k.
    #[test]
    fn single_unit_matches_hand_derivative() {
        let p = LstmParams {
            w_x: Matrix::column(&[0.5, -0.3, 0.8, 0.2]),
            w_h: Matrix::column(&[0.1, 0.4, -0.6, 0.7]),
            b: Matrix::column(&[0.05, 0.3, -0.1, 0.0]),
        };
        let (x, h0, c0) = (0.9_f64, -0.4_f64, 0.6_f64);
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let a = |k: usize| p.w_x.data()[k] * x + p.w_h.data()[k] * h0 + p.b.data()[k];
        let (i, f, o, g) = (sig(a(0)), sig(a(1)), sig(a(2)), a(3).tanh());
        let c = f * c0 + i * g;
        let tc = c.tanh();
        // dh/dc and the chain into each pre-activation
        let dhdc = o * (1.0 - tc * tc);
        let da = [
            dhdc * g * i * (1.0 - i),
            dhdc * c0 * f * (1.0 - f),
            tc * o * (1.0 - o),
            dhdc * i * (1.0 - g * g),
        ];
        let dx_hand: f64 = (0..4).map(|k| da[k] * p.w_x.data()[k]).sum();
        let dc0_hand = dhdc * f;

        let (_, _, cache) = lstm_cell_forward(
            &Matrix::column(&[x]),
            &Matrix::column(&[h0]),
            &Matrix::column(&[c0]),
            &p,
        )
        .unwrap();
        let (step, grads) =
            lstm_cell_backward(&cache, &Matrix::column(&[1.0]), &Matrix::column(&[0.0]), &p).unwrap();
        assert!((step.dx.data()[0] - dx_hand).abs() < 1e-15);
        assert!((step.dc_prev.data()[0] - dc0_hand).abs() < 1e-15);
        for k in 0..4 {
            assert!((grads.b.data()[k] - da[k]).abs() < 1e-15);
            assert!((grads.w_x.data()[k] - da[k] * x).abs() < 1e-15);
            assert!((grads.w_h.data()[k] - da[k] * h0).abs() < 1e-15);
        }
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = RngState::new(23);
        for _ in 0..20 {
            let (hs, e) = (rng.gen_range(1..5), rng.gen_range(1..4));
            let p = rand_params(&mut rng, hs, e);
            let x = rand_col(&mut rng, e);
            let h0 = rand_col(&mut rng, hs);
            let c0 = rand_col(&mut rng, hs);
            // Scalar objective: weighted sum of h and c.
            let wh = rand_col(&mut rng, hs);
            let wc = rand_col(&mut rng, hs);
            let objective = |x: &Matrix<f64>, h0: &Matrix<f64>, c0: &Matrix<f64>, p: &LstmParams<f64>| {
                let (h, c, _) = lstm_cell_forward(x, h0, c0, p).unwrap();
                let s: f64 = h.data().iter().zip(wh.data()).map(|(a, b)| a * b).sum();
                let t: f64 = c.data().iter().zip(wc.data()).map(|(a, b)| a * b).sum();
                s + t
            };
            let (_, _, cache) = lstm_cell_forward(&x, &h0, &c0, &p).unwrap();
            let (step, grads) = lstm_cell_backward(&cache, &wh, &wc, &p).unwrap();

            let checks: Vec<(Matrix<f64>, Matrix<f64>)> = vec![
                (finite_diff_grad(|m| objective(m, &h0, &c0, &p), &x, 1e-5).unwrap(), step.dx.clone()),
                (finite_diff_grad(|m| objective(&x, m, &c0, &p), &h0, 1e-5).unwrap(), step.dh_prev.clone()),
                (finite_diff_grad(|m| objective(&x, &h0, m, &p), &c0, 1e-5).unwrap(), step.dc_prev.clone()),
                (
                    finite_diff_grad(|m| objective(&x, &h0, &c0, &LstmParams { w_x: m.clone(), ..p.clone() }), &p.w_x, 1e-5).unwrap(),
                    grads.w_x.clone(),
                ),
                (
                    finite_diff_grad(|m| objective(&x, &h0, &c0, &LstmParams { w_h: m.clone(), ..p.clone() }), &p.w_h, 1e-5).unwrap(),
                    grads.w_h.clone(),
                ),
                (
                    finite_diff_grad(|m| objective(&x, &h0, &c0, &LstmParams { b: m.clone(), ..p.clone() }), &p.b, 1e-5).unwrap(),
                    grads.b.clone(),
                ),
            ];
            for (fd, an) in checks {
                for (a, b) in fd.data().iter().zip(an.data()) {
                    assert!(rel_err(*a, *b) < 1e-4, "fd {a} vs analytic {b}");
                }
            }
        }
    }

    #[test]
    fn mismatched_cache_is_a_contract_violation() {
        let mut rng = RngState::new(3);
        let small = rand_params(&mut rng, 2, 2);
        let big = rand_params(&mut rng, 3, 2);
        let (_, _, cache) = lstm_cell_forward(
            &rand_col(&mut rng, 2),
            &Matrix::zeros(2, 1),
            &Matrix::zeros(2, 1),
            &small,
        )
        .unwrap();
        let z = Matrix::zeros(3, 1);
        let err = lstm_cell_backward(&cache, &z, &z, &big).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn forward_rejects_wrong_input_size() {
        let p = LstmParams::<f64>::zeros(2, 3);
        let z = Matrix::zeros(2, 1);
        assert!(matches!(
            lstm_cell_forward(&Matrix::zeros(2, 1), &z, &z, &p),
            Err(Error::Dimension { .. })
        ));
    }
}
