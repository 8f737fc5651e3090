//! Knowledge-augmented encoder-decoder dialogue model.
//!
//! A sequence-to-sequence LSTM whose decoder is fed, at every step, an
//! external context vector predicted from the encoder state. Training
//! combines next-token likelihood, an ec regression term, and a divergence
//! term that penalizes the decoder for doing well when the ec is zeroed.
//! All gradients are exact BPTT, checked against central differences.
//!
//! The numeric core in [`numeric`] is generic over [`numeric::Scalar`]; the
//! model and everything above it run on the `f64` aliases below.

pub mod embedding;
pub mod error;
pub mod gradcheck;
pub mod knowledge;
pub mod model;
pub mod numeric;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};

/// The model's scalar type.
pub type Real = f64;
pub type Matrix = numeric::Matrix<Real>;
pub type LstmParams = numeric::LstmParams<Real>;
pub type LstmCache = numeric::LstmCache<Real>;
