//! Dense linear algebra, the LSTM cell, loss primitives, seeded sampling and
//! the finite-difference oracle. Everything here is generic over [`Scalar`].

mod gradcheck;
mod loss;
mod lstm;
mod matrix;
mod rng;
mod scalar;

pub use gradcheck::{finite_diff_grad, relative_error};
pub use loss::{softmax, softmax_cross_entropy};
pub use lstm::{
    lstm_cell_backward, lstm_cell_backward_into, lstm_cell_forward, LstmCache, LstmParams,
    LstmStepGrads,
};
pub use matrix::Matrix;
pub use rng::{gaussian_sample, glorot_init, RngState, RNG_STATE_BYTES};
pub use scalar::Scalar;
