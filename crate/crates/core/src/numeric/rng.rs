use rand::distributions::{Distribution, Uniform};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Serialized size of an [`RngState`]: seed (8) + key (32) + stream (8) + word position (16).
pub const RNG_STATE_BYTES: usize = 64;

/// Seeded ChaCha8 stream. The full position is serializable, so a restored
/// state continues the exact same sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct RngState {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn to_bytes(&self) -> [u8; RNG_STATE_BYTES] {
        let mut out = [0u8; RNG_STATE_BYTES];
        out[0..8].copy_from_slice(&self.seed.to_le_bytes());
        out[8..40].copy_from_slice(&self.inner.get_seed());
        out[40..48].copy_from_slice(&self.inner.get_stream().to_le_bytes());
        out[48..64].copy_from_slice(&self.inner.get_word_pos().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != RNG_STATE_BYTES {
            return Err(Error::Input(format!(
                "rng state must be {RNG_STATE_BYTES} bytes, got {}",
                bytes.len()
            )));
        }
        let seed = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
        let key: [u8; 32] = bytes[8..40].try_into().unwrap();
        let stream = u64::from_le_bytes(bytes[40..48].try_into().unwrap());
        let pos = u128::from_le_bytes(bytes[48..64].try_into().unwrap());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        inner.set_word_pos(pos);
        Ok(Self { seed, inner })
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Uniform on `[-b, b]` with `b = sqrt(6 / (rows + cols))`, drawn in row-major order.
pub fn glorot_init<T: Scalar>(rng: &mut RngState, rows: usize, cols: usize) -> Matrix<T> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Matrix::from_fn(rows, cols, |_, _| T::from_f64_lossy(dist.sample(rng)))
}

/// One draw from `N(mu, sigma^2)` as `mu + sigma * z`, `z` standard normal
/// (ziggurat sampler from `rand_distr`).
pub fn gaussian_sample(rng: &mut RngState, mu: f64, sigma: f64) -> f64 {
    debug_assert!(sigma >= 0.0);
    let z: f64 = StandardNormal.sample(rng);
    mu + sigma * z
}
