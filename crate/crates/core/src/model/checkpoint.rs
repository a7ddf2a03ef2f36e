//! Versioned binary checkpoints.
//!
//! Layout (little endian): magic `MOLSPACE`, u32 version, u32-prefixed config
//! text, u32-prefixed vocabulary checksum, u32 tensor count, then per tensor a
//! u32-prefixed name, u64 rows, u64 cols and `rows·cols` f64 values.

use std::io::{Read, Write};
use std::path::Path;

use super::config::{self, ModelConfig, TrainConfig};
use super::net::{Model, Tensor};
use crate::error::{Error, Result};
use crate::smiles::VOCAB_SHA256;

const MAGIC: &[u8; 8] = b"MOLSPACE";
const VERSION: u32 = 1;

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

/// Serializes the model with the training settings it was produced with.
pub fn to_bytes(model: &Model, train: &TrainConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_bytes(&mut out, config::to_text(&model.config, train).as_bytes());
    put_bytes(&mut out, VOCAB_SHA256.as_bytes());
    out.extend_from_slice(&(model.tensors().len() as u32).to_le_bytes());
    for t in model.tensors() {
        put_bytes(&mut out, t.name.as_bytes());
        out.extend_from_slice(&(t.rows as u64).to_le_bytes());
        out.extend_from_slice(&(t.cols as u64).to_le_bytes());
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<(Model, TrainConfig)> {
    let mut r = Reader { buf: bytes };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let (model_cfg, train_cfg): (ModelConfig, TrainConfig) = config::from_text(&r.string()?)?;
    let vocab = r.string()?;
    if vocab != VOCAB_SHA256 {
        return Err(Error::Checkpoint(format!(
            "vocabulary checksum mismatch: checkpoint {vocab}, build {VOCAB_SHA256}"
        )));
    }
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows.checked_mul(cols).ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?;
        let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor size overflow".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        tensors.push(Tensor { name, rows, cols, data });
    }
    if !r.buf.is_empty() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    Ok((Model::from_tensors(model_cfg, tensors)?, train_cfg))
}

pub fn save(path: &Path, model: &Model, train: &TrainConfig) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(model, train))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Model, TrainConfig)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
