//! Binary checkpoint format (little-endian):
//!
//! ```text
//! "XED1"            magic
//! u32               format version (1)
//! u32 + bytes       ModelConfig as JSON
//! u32 + (u32,u32)*  shape table, one (rows, cols) per tensor
//! f64*              parameters, tensor by tensor in ExtEdParams::tensors order
//! f64*              Adam first moments, same order
//! f64*              Adam second moments, same order
//! u64               training step count
//! 64 bytes          rng state
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{AdamState, ExtEdParams, ModelConfig};
use crate::numeric::{RngState, RNG_STATE_BYTES};
use crate::Matrix;

pub const MAGIC: &[u8; 4] = b"XED1";
pub const FORMAT_VERSION: u32 = 1;

/// Complete training state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ExtEdParams,
    pub optimizer: AdamState,
    pub step: u64,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let cfg = serde_json::to_vec(&self.config).expect("config serializes");
        out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
        out.extend_from_slice(&cfg);

        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (_, m) in &tensors {
            out.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u32).to_le_bytes());
        }
        for set in [&self.params, &self.optimizer.m, &self.optimizer.v] {
            for (_, m) in set.tensors() {
                for v in m.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.rng.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(r.error_at(0, "bad magic"));
        }
        let version_at = r.pos;
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(r.error_at(version_at, &format!("unsupported version {version}")));
        }
        let cfg_len = r.u32()? as usize;
        let cfg_at = r.pos;
        let config: ModelConfig = serde_json::from_slice(r.take(cfg_len)?)
            .map_err(|e| r.error_at(cfg_at, &format!("config: {e}")))?;
        config.validate().map_err(|e| r.error_at(cfg_at, &e.to_string()))?;

        let table_at = r.pos;
        let n = r.u32()? as usize;
        let mut shapes = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            shapes.push((rows, cols));
        }
        if shapes != ExtEdParams::expected_shapes(&config) {
            return Err(r.error_at(table_at, "shape table does not match the stored config"));
        }

        let read_set = |r: &mut Reader| -> Result<ExtEdParams> {
            let mut p = ExtEdParams::zeros(&config);
            for (_, m) in p.tensors_mut() {
                fill(r, m)?;
            }
            Ok(p)
        };
        let params = read_set(&mut r)?;
        let m = read_set(&mut r)?;
        let v = read_set(&mut r)?;
        let step = r.u64()?;
        let rng_at = r.pos;
        let rng = RngState::from_bytes(r.take(RNG_STATE_BYTES)?)
            .map_err(|e| r.error_at(rng_at, &e.to_string()))?;
        if r.pos != bytes.len() {
            return Err(r.error_at(r.pos, "trailing bytes"));
        }
        Ok(Self {
            config,
            params,
            optimizer: AdamState { m, v, t: step },
            step,
            rng,
        })
    }

    /// Fails unless this checkpoint's tensor shapes match `cfg`.
    pub fn check_compatible(&self, cfg: &ModelConfig) -> Result<()> {
        self.params.check_shapes(cfg)
    }
}

fn fill(r: &mut Reader, m: &mut Matrix) -> Result<()> {
    let at = r.pos;
    let raw = r.take(m.len() * 8)?;
    for (dst, chunk) in m.data_mut().iter_mut().zip(raw.chunks_exact(8)) {
        *dst = f64::from_le_bytes(chunk.try_into().unwrap());
    }
    if !m.is_finite() {
        return Err(r.error_at(at, "non-finite tensor value"));
    }
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Binary {
                offset: self.pos,
                msg: format!("truncated: need {n} bytes, {} left", self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn error_at(&self, offset: usize, msg: &str) -> Error {
        Error::Binary {
            offset,
            msg: msg.to_string(),
        }
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

/// Loads a checkpoint and requires its shapes to match `expected`.
pub fn load_checkpoint_for(path: &Path, expected: &ModelConfig) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    ckpt.check_compatible(expected)?;
    Ok(ckpt)
}
