//! Binary model archive.
//!
//! Layout, all integers little-endian:
//! `b"XNCK"`, `u32` version, `u64` config length, config as JSON,
//! `u64` tensor count, then per tensor a `u64` length and that many `f64`s.
//! Tensors follow [`NecessityModel::tensors`], so batch-norm running
//! statistics are included.

use std::io::{Read, Write};
use std::path::Path;

use super::{ModelConfig, ModelError, NecessityModel};

pub const MAGIC: &[u8; 4] = b"XNCK";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

pub fn to_bytes(model: &NecessityModel) -> Vec<u8> {
    let config = serde_json::to_vec(&model.config).expect("config serializes");
    let tensors = model.tensors();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u64).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(tensors.len() as u64).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| bad("truncated archive"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<NecessityModel, ModelError> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(bad("not a model checkpoint"));
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let clen = c.u64()? as usize;
    let config: ModelConfig = serde_json::from_slice(c.take(clen)?).map_err(|e| bad(format!("config: {e}")))?;
    let mut model = NecessityModel::new(config)?;
    let count = c.u64()? as usize;
    let mut tensors = model.tensors_mut();
    if count != tensors.len() {
        return Err(bad(format!("archive has {count} tensors, architecture expects {}", tensors.len())));
    }
    for (i, t) in tensors.iter_mut().enumerate() {
        let len = c.u64()? as usize;
        if len != t.len() {
            return Err(bad(format!("tensor {i} has {len} values, expected {}", t.len())));
        }
        let raw = c.take(len.checked_mul(8).ok_or_else(|| bad("tensor too large"))?)?;
        for (dst, chunk) in t.iter_mut().zip(raw.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if c.pos != buf.len() {
        return Err(bad("trailing bytes after last tensor"));
    }
    Ok(model)
}

pub fn save(model: &NecessityModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(model))?;
    f.sync_all()?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<NecessityModel, ModelError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let mut m = NecessityModel::new(ModelConfig { init_seed: 4, ..Default::default() }).unwrap();
        m.head.norms[0].running_mean[3] = 0.123456789;
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn corrupt_archives_are_rejected() {
        let m = NecessityModel::new(ModelConfig::default()).unwrap();
        let bytes = to_bytes(&m);
        assert!(from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(from_bytes(b"NOPE").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
    }
}
