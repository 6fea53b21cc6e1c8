//! Versioned binary checkpoint container.
//!
//! Layout (little endian):
//!
//! ```text
//! magic    8 bytes  "PAUSELM\0"
//! version  u32
//! header   u32 length + JSON (model config, vocab fingerprint, training meta)
//! count    u32
//! tensor*  u32 name length, name, u32 rows, u32 cols, rows*cols f64
//! ```
//!
//! Optimizer moments, when present, are stored as extra tensors prefixed
//! `adam.m.` and `adam.v.`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::ModelParams;
use super::tensor::Matrix;
use super::Model;
use crate::error::{Error, Result};
use crate::trainer::adam::AdamState;

const MAGIC: &[u8; 8] = b"PAUSELM\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub stage: String,
    /// Completed epochs.
    pub epoch: u64,
    /// Completed optimizer steps.
    pub iteration: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    vocab_fingerprint: String,
    meta: CheckpointMeta,
    adam_step: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub vocab_fingerprint: String,
    pub meta: CheckpointMeta,
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(model: Model, vocab_fingerprint: impl Into<String>) -> Self {
        Checkpoint {
            model,
            vocab_fingerprint: vocab_fingerprint.into(),
            meta: CheckpointMeta::default(),
            optimizer: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            config: self.model.config.clone(),
            vocab_fingerprint: self.vocab_fingerprint.clone(),
            meta: self.meta.clone(),
            adam_step: self.optimizer.as_ref().map(|o| o.step),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        let mut tensors: Vec<(String, &Matrix)> = self.model.params.named();
        if let Some(opt) = &self.optimizer {
            let names = opt.m.names();
            tensors.extend(names.iter().map(|n| format!("adam.m.{n}")).zip(opt.m.tensors()));
            tensors.extend(names.iter().map(|n| format!("adam.v.{n}")).zip(opt.v.tensors()));
        }
        let payload: usize = tensors.iter().map(|(n, t)| 12 + n.len() + 8 * t.len()).sum();
        let mut out = Vec::with_capacity(20 + header.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for (name, t) in tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rows as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols as u32).to_le_bytes());
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(bad("not a checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(bad(&format!("unsupported checkpoint version {version}")));
        }
        let hlen = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(hlen)?).map_err(|e| bad(&format!("header: {e}")))?;
        header.config.validate()?;
        let count = r.u32()? as usize;
        let mut read = Vec::with_capacity(count);
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let raw = r.take(rows * cols * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
            read.push((name, Matrix::from_vec(rows, cols, data)));
        }
        if r.pos != bytes.len() {
            return Err(bad("trailing bytes after tensors"));
        }

        let cfg = &header.config;
        let mut template = ModelParams::zeros(cfg);
        let names = template.names();
        let shapes = ModelParams::expected_shapes(cfg);
        let groups = if header.adam_step.is_some() { 3 } else { 1 };
        if read.len() != names.len() * groups {
            return Err(bad(&format!("expected {} tensors, found {}", names.len() * groups, read.len())));
        }
        let mut it = read.into_iter();
        let mut fill = |target: &mut ModelParams, prefix: &str| -> Result<()> {
            for ((dst, name), shape) in target.tensors_mut().into_iter().zip(&names).zip(&shapes) {
                let (n, m) = it.next().expect("count checked");
                let want = format!("{prefix}{name}");
                if n != want {
                    return Err(bad(&format!("expected tensor {want:?}, found {n:?}")));
                }
                if (m.rows, m.cols) != *shape {
                    return Err(bad(&format!(
                        "tensor {n}: shape {}x{}, expected {}x{}",
                        m.rows, m.cols, shape.0, shape.1
                    )));
                }
                *dst = m;
            }
            Ok(())
        };
        fill(&mut template, "")?;
        let params = template;
        let optimizer = match header.adam_step {
            Some(step) => {
                let mut m = params.zeros_like();
                let mut v = params.zeros_like();
                fill(&mut m, "adam.m.")?;
                fill(&mut v, "adam.v.")?;
                Some(AdamState { m, v, step })
            }
            None => None,
        };
        if !params.all_finite() {
            return Err(Error::Numeric("checkpoint contains non-finite parameters".into()));
        }
        Ok(Checkpoint {
            model: Model { config: header.config, params },
            vocab_fingerprint: header.vocab_fingerprint,
            meta: header.meta,
            optimizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Errors unless this checkpoint was trained with `vocab`.
    pub fn check_vocab(&self, vocab: &crate::tokenizer::Vocabulary) -> Result<()> {
        if vocab.len() != self.model.config.vocab_size || vocab.fingerprint() != self.vocab_fingerprint {
            return Err(Error::Validation(format!(
                "vocabulary mismatch: checkpoint expects {} entries with fingerprint {}, got {} entries with fingerprint {}",
                self.model.config.vocab_size,
                self.vocab_fingerprint,
                vocab.len(),
                vocab.fingerprint()
            )));
        }
        Ok(())
    }
}

fn bad(msg: &str) -> Error {
    Error::Validation(format!("checkpoint: {msg}"))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| bad("truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
