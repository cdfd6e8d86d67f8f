//! Binary checkpoints: a fixed header, the architecture, the parameters as
//! little-endian f64, and an optional optimizer section.
//!
//! ```text
//! magic      8 bytes  "HSPTCKPT"
//! version    u32      1
//! input_dim  u32
//! width      u32
//! layers     u32
//! act_tag    u8       0 = softplus, 1 = sine
//! act_param  f64
//! n_params   u64
//! params     n_params x f64
//! has_opt    u8
//! [iteration u64, step u64, lr f64, beta1 f64, beta2 f64, eps f64, m, v]
//! ```

use std::path::Path;

use super::{Activation, AdamState, Architecture, NeuralField};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"HSPTCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub field: NeuralField,
    pub optimizer: Option<(AdamState, usize)>,
}

pub fn encode_checkpoint(field: &NeuralField, optimizer: Option<(&AdamState, usize)>) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * field.params.len() * 3);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let a = &field.arch;
    for v in [a.input_dim, a.width, a.layers] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let (tag, param) = match a.activation {
        Activation::Softplus { beta } => (0u8, beta),
        Activation::Sine { omega0 } => (1u8, omega0),
    };
    out.push(tag);
    out.extend_from_slice(&param.to_le_bytes());
    put_f64s(&mut out, &field.params);
    match optimizer {
        None => out.push(0),
        Some((s, iteration)) => {
            out.push(1);
            out.extend_from_slice(&(iteration as u64).to_le_bytes());
            out.extend_from_slice(&s.step.to_le_bytes());
            for v in [s.lr, s.beta1, s.beta2, s.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            put_f64s(&mut out, &s.m);
            put_f64s(&mut out, &s.v);
        }
    }
    out
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    out.extend_from_slice(&(xs.len() as u64).to_le_bytes());
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > (self.buf.len() - self.pos) / 8 {
            return Err(Error::Checkpoint("array length exceeds file size".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Checkpoint("not a checkpoint (bad magic bytes)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "checkpoint version {version} is not supported (expected {VERSION})"
        )));
    }
    let input_dim = r.u32()? as usize;
    let width = r.u32()? as usize;
    let layers = r.u32()? as usize;
    let activation = match (r.u8()?, r.f64()?) {
        (0, beta) => Activation::Softplus { beta },
        (1, omega0) => Activation::Sine { omega0 },
        (t, _) => return Err(Error::Checkpoint(format!("unknown activation tag {t}"))),
    };
    let arch = Architecture::new(input_dim, width, layers, activation)
        .map_err(|e| Error::Checkpoint(format!("bad architecture: {e}")))?;
    let params = r.f64s()?;
    let field = NeuralField::new(arch, params).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let iteration = r.u64()? as usize;
            let step = r.u64()?;
            let (lr, beta1, beta2, eps) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let m = r.f64s()?;
            let v = r.f64s()?;
            if m.len() != field.params.len() || v.len() != field.params.len() {
                return Err(Error::Checkpoint("optimizer moments do not match parameters".into()));
            }
            Some((AdamState { step, m, v, lr, beta1, beta2, eps }, iteration))
        }
        t => return Err(Error::Checkpoint(format!("bad optimizer flag {t}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after checkpoint".into()));
    }
    Ok(Checkpoint { field, optimizer })
}

pub fn save_checkpoint(path: impl AsRef<Path>, field: &NeuralField, optimizer: Option<(&AdamState, usize)>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode_checkpoint(field, optimizer))?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&std::fs::read(path)?)
}
