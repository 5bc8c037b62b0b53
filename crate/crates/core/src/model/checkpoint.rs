//! Binary checkpoint format.
//!
//! ```text
//! "GCNC" | version: u8 | header_len: u32 LE | header: UTF-8 JSON | tensors: f64 LE
//! ```
//!
//! Tensors follow the header's `tensors` list: per branch the main kernels and
//! bias, then gate kernels and bias when gated, then the output weights and
//! bias, and finally the embedding table.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use crate::text::EmbeddingMatrix;

use super::{ConvBranch, GcnParams, ModelConfig, ModelMeta};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"GCNC";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    seed: u64,
    vocab_hash: String,
    embedding_trainable: bool,
    tensors: Vec<TensorEntry>,
}

fn named_tensors(params: &GcnParams) -> Vec<(String, &Tensor)> {
    let mut out = Vec::new();
    for b in &params.branches {
        let h = b.kernel_size;
        out.push((format!("conv{h}.main.kernels"), &b.main_kernels));
        out.push((format!("conv{h}.main.bias"), &b.main_bias));
        if let (Some(k), Some(bias)) = (&b.gate_kernels, &b.gate_bias) {
            out.push((format!("conv{h}.gate.kernels"), k));
            out.push((format!("conv{h}.gate.bias"), bias));
        }
    }
    out.push(("dense.weights".into(), &params.dense_w));
    out.push(("dense.bias".into(), &params.dense_b));
    out.push(("embedding".into(), &params.embedding.matrix));
    out
}

pub fn checkpoint_bytes(params: &GcnParams) -> Result<Vec<u8>> {
    let tensors = named_tensors(params);
    let header = Header {
        config: params.config.clone(),
        seed: params.meta.seed,
        vocab_hash: params.meta.vocab_hash.clone(),
        embedding_trainable: params.embedding.trainable,
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.clone(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let payload: usize = tensors.iter().map(|(_, t)| t.len() * 8).sum();
    let mut out = Vec::with_capacity(9 + header.len() + payload);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for (_, t) in &tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(params: &GcnParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = checkpoint_bytes(params)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Truncated(format!(
                "needed {n} bytes for {what} at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn tensor(&mut self, entry: &TensorEntry, expected: &[usize]) -> Result<Tensor> {
        if entry.shape != expected {
            return Err(Error::Invalid(format!(
                "checkpoint tensor {} has shape {:?}, config implies {expected:?}",
                entry.name, entry.shape
            )));
        }
        let len: usize = expected.iter().product();
        let raw = self.take(len * 8, &entry.name)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Tensor::new(expected.to_vec(), data)
    }
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<GcnParams> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::MagicMismatch { found: magic });
    }
    let version = r.take(1, "version")?[0];
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes(r.take(4, "header length")?.try_into().expect("4 bytes")) as usize;
    let header: Header = serde_json::from_slice(r.take(header_len, "header")?)?;
    let cfg = header.config;
    cfg.validate()?;
    let (f, d) = (cfg.filters, cfg.embed_dim);

    let mut entries = header.tensors.iter();
    let mut next = |what: &str| {
        entries
            .next()
            .ok_or_else(|| Error::Invalid(format!("checkpoint header is missing tensor {what}")))
    };

    let mut branches = Vec::with_capacity(cfg.kernel_sizes.len());
    for &h in &cfg.kernel_sizes {
        let main_kernels = r.tensor(next("main kernels")?, &[f, h, d])?;
        let main_bias = r.tensor(next("main bias")?, &[f])?;
        let (gate_kernels, gate_bias) = if cfg.gate.is_gated() {
            (
                Some(r.tensor(next("gate kernels")?, &[f, h, d])?),
                Some(r.tensor(next("gate bias")?, &[f])?),
            )
        } else {
            (None, None)
        };
        branches.push(ConvBranch {
            kernel_size: h,
            main_kernels,
            main_bias,
            gate_kernels,
            gate_bias,
        });
    }
    let fl = cfg.feature_len();
    let dense_w = r.tensor(next("dense weights")?, &[fl, 1])?;
    let dense_b = r.tensor(next("dense bias")?, &[1])?;
    let emb_entry = next("embedding")?;
    let rows = match emb_entry.shape.as_slice() {
        [rows, dim] if *dim == d && *rows >= 1 => *rows,
        other => {
            return Err(Error::Invalid(format!(
                "embedding shape {other:?} incompatible with embed_dim {d}"
            )))
        }
    };
    let matrix = r.tensor(emb_entry, &[rows, d])?;
    if r.pos != bytes.len() {
        return Err(Error::Invalid(format!(
            "{} trailing bytes after checkpoint payload",
            bytes.len() - r.pos
        )));
    }
    Ok(GcnParams {
        config: cfg,
        branches,
        dense_w,
        dense_b,
        embedding: EmbeddingMatrix {
            matrix,
            trainable: header.embedding_trainable,
        },
        meta: ModelMeta {
            seed: header.seed,
            vocab_hash: header.vocab_hash,
        },
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<GcnParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}
