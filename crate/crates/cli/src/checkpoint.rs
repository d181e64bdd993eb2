//! Checkpoint persistence.
//!
//! Layout (all integers little-endian):
//!   magic "SNSG" | version u8 | digest [32] | tensor count u32 |
//!   per tensor: name length u32, name bytes, rank u8, extents u32 each,
//!   then the values as f32.
//!
//! Values are stored at 32-bit precision; save -> load -> save is
//! byte-identical. The digest is the SHA-256 of the model identity string,
//! and loading under a different identity is refused.

use sha2::{Digest, Sha256};
use snsgan_core::error::{Error, Result};
use snsgan_core::Param;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"SNSG";
const VERSION: u8 = 1;

pub fn identity_digest(identity: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(identity.as_bytes());
    hasher.finalize().into()
}

/// Serializes named parameters in order.
pub fn save(path: impl AsRef<Path>, identity: &str, params: &[Param]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&identity_digest(identity));
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        let name = p.name();
        let value = p.value_clone();
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(value.shape().len() as u8);
        for &d in value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in value.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::format(format!(
                "checkpoint truncated: wanted {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Loads parameter values into an already built model whose parameter list
/// must match the stored names and shapes exactly.
pub fn load(path: impl AsRef<Path>, identity: &str, params: &[Param]) -> Result<()> {
    let path = path.as_ref();
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    let mut cur = Cursor { data: &data, pos: 0 };

    if cur.take(4)? != MAGIC {
        return Err(Error::format(format!("{}: not a checkpoint (bad magic)", path.display())));
    }
    let version = cur.u8()?;
    if version != VERSION {
        return Err(Error::format(format!(
            "{}: unsupported checkpoint version {version}",
            path.display()
        )));
    }
    let stored_digest: [u8; 32] = cur.take(32)?.try_into().unwrap();
    if stored_digest != identity_digest(identity) {
        return Err(Error::config(format!(
            "{}: checkpoint was written for a different model configuration",
            path.display()
        )));
    }
    let count = cur.u32_le()? as usize;
    if count != params.len() {
        return Err(Error::format(format!(
            "{}: checkpoint holds {count} tensors, model has {}",
            path.display(),
            params.len()
        )));
    }
    for p in params {
        let name_len = cur.u32_le()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| Error::format("checkpoint tensor name is not UTF-8".to_string()))?;
        if name != p.name() {
            return Err(Error::format(format!(
                "checkpoint tensor {name:?} does not match model parameter {:?}",
                p.name()
            )));
        }
        let rank = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32_le()? as usize);
        }
        if shape != p.shape() {
            return Err(Error::format(format!(
                "checkpoint tensor {name:?} has shape {shape:?}, model expects {:?}",
                p.shape()
            )));
        }
        let numel: usize = shape.iter().product();
        let bytes = cur.take(4 * numel)?;
        p.update(|dst| {
            for (d, chunk) in dst.iter_mut().zip(bytes.chunks_exact(4)) {
                *d = f64::from(f32::from_le_bytes(chunk.try_into().unwrap()));
            }
        });
    }
    if cur.pos != data.len() {
        return Err(Error::format(format!(
            "{}: {} trailing bytes after the last tensor",
            path.display(),
            data.len() - cur.pos
        )));
    }
    Ok(())
}
