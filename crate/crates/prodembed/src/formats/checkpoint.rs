//! Transformer checkpoints.
//!
//! ```text
//! magic        8 bytes   "PEMBCKPT"
//! version      u32       1
//! n_layers, n_heads, d_model, d_ff, max_len, vocab_size, embed_factor (0 = none)
//!              u64 each
//! dropout      f64
//! seed         u64
//! source tag   u32 length + UTF-8 (e.g. "mlm-bert-like")
//! dtype        u8        8 (f64)
//! scalars      u64       number of parameters that follow
//! checksum     32 bytes  SHA-256 of the payload
//! payload      f64 LE, tensors in `Params::entries` order, row-major
//! ```
//!
//! A text sidecar `<file>.manifest` lists every tensor's name, shape and
//! byte offset. It is informational; loading only needs the binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use prodembed_core::embed::SourceTag;
use prodembed_core::model::{init_weights, ModelConfig, TransformerWeights};

use super::{put_string, put_u32, put_u64, read_bytes, sha256, write_bytes, Reader};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PEMBCKPT";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub tag: SourceTag,
    pub weights: TransformerWeights,
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn header(c: &Checkpoint) -> Vec<u8> {
    let cfg = &c.config;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    for v in [cfg.n_layers, cfg.n_heads, cfg.d_model, cfg.d_ff, cfg.max_len, cfg.vocab_size, cfg.embed_factor.unwrap_or(0)] {
        put_u64(&mut out, v as u64);
    }
    out.extend_from_slice(&cfg.dropout.to_le_bytes());
    put_u64(&mut out, cfg.seed);
    put_string(&mut out, c.tag.as_str());
    out.push(DTYPE_F64);
    out
}

/// The binary file and its manifest text.
pub fn encode_checkpoint(c: &Checkpoint) -> (Vec<u8>, String) {
    let entries = c.weights.entries();
    let mut payload = Vec::with_capacity(c.weights.param_count() * 8);
    for (_, t) in &entries {
        for x in t.data() {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut out = header(c);
    put_u64(&mut out, (payload.len() / 8) as u64);
    out.extend_from_slice(&sha256(&payload));
    let base = out.len();
    out.extend_from_slice(&payload);

    let mut manifest = format!("# checkpoint v{VERSION} tag={} dtype=f64\n", c.tag.as_str());
    manifest.push_str("name\tshape\toffset\tbytes\n");
    let mut offset = base;
    for (name, t) in &entries {
        let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        let bytes = t.len() * 8;
        let _ = writeln!(manifest, "{name}\t{}\t{offset}\t{bytes}", shape.join("x"));
        offset += bytes;
    }
    (out, manifest)
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, path);
    if &r.array::<8>()? != MAGIC {
        return Err(Error::format(path, "not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported checkpoint version {version}")));
    }
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.usize()?;
    }
    let dropout = r.f64()?;
    let seed = r.u64()?;
    let tag_name = r.string()?;
    let tag = SourceTag::parse(&tag_name)
        .filter(|t| *t != SourceTag::Word2Vec)
        .ok_or_else(|| Error::format(path, format!("unknown model tag {tag_name:?}")))?;
    let dtype = r.u8()?;
    if dtype != DTYPE_F64 {
        return Err(Error::format(path, format!("unsupported dtype code {dtype}")));
    }
    let config = ModelConfig {
        n_layers: dims[0],
        n_heads: dims[1],
        d_model: dims[2],
        d_ff: dims[3],
        max_len: dims[4],
        vocab_size: dims[5],
        embed_factor: (dims[6] != 0).then_some(dims[6]),
        dropout,
        seed,
    };
    config.validate().map_err(|e| Error::format(path, format!("header: {e}")))?;
    let scalars = r.usize()?;
    if scalars != config.param_count() {
        return Err(Error::format(
            path,
            format!("header promises {scalars} parameters but the config needs {}", config.param_count()),
        ));
    }
    let checksum = r.array::<32>()?;
    let payload = r.rest();
    if payload.len() != scalars * 8 {
        return Err(Error::format(path, format!("payload is {} bytes, expected {}", payload.len(), scalars * 8)));
    }
    if sha256(payload) != checksum {
        return Err(Error::format(path, "checksum mismatch"));
    }
    let mut weights = init_weights(&config)?;
    let mut values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    for slot in weights.slots_mut() {
        for x in slot.data_mut() {
            *x = values.next().expect("length checked");
        }
    }
    if let Some(name) = weights.first_non_finite() {
        return Err(Error::format(path, format!("tensor {name} holds non-finite values")));
    }
    Ok(Checkpoint { config, tag, weights })
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    let (bin, manifest) = encode_checkpoint(c);
    write_bytes(path, &bin)?;
    write_bytes(&manifest_path(path), manifest.as_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_bytes(path)?, path)
}
