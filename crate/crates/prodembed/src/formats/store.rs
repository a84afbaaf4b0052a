//! Product embedding stores.
//!
//! ```text
//! magic      8 bytes   "PEMBSTOR"
//! version    u32       1
//! d          u32
//! count      u64
//! tag        u32 length + UTF-8 (e.g. "word2vec")
//! checksum   32 bytes  SHA-256 of the payload
//! payload    count × (u32 id length, UTF-8 id, d × f32 LE)
//! ```

use std::path::Path;

use prodembed_core::embed::{EmbeddingStore, SourceTag};

use super::{put_string, put_u32, put_u64, read_bytes, sha256, write_bytes, Reader};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PEMBSTOR";
pub const VERSION: u32 = 1;

pub fn encode_store(store: &EmbeddingStore) -> Vec<u8> {
    let mut payload = Vec::new();
    for (id, v) in store.iter() {
        put_string(&mut payload, id);
        for x in v {
            payload.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut out = Vec::with_capacity(payload.len() + 64);
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, store.dim() as u32);
    put_u64(&mut out, store.len() as u64);
    put_string(&mut out, store.tag().as_str());
    out.extend_from_slice(&sha256(&payload));
    out.extend_from_slice(&payload);
    out
}

pub fn decode_store(bytes: &[u8], path: &Path) -> Result<EmbeddingStore> {
    let mut r = Reader::new(bytes, path);
    if &r.array::<8>()? != MAGIC {
        return Err(Error::format(path, "not an embedding store (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported store version {version}")));
    }
    let dim = r.u32()? as usize;
    let count = r.usize()?;
    let tag_name = r.string()?;
    let tag = SourceTag::parse(&tag_name).ok_or_else(|| Error::format(path, format!("unknown source tag {tag_name:?}")))?;
    let checksum = r.array::<32>()?;
    let payload = r.rest();
    if sha256(payload) != checksum {
        return Err(Error::format(path, "checksum mismatch"));
    }
    let mut store = EmbeddingStore::new(dim, tag).map_err(|e| Error::format(path, e.to_string()))?;
    let mut p = Reader::new(payload, path);
    let mut row = vec![0f32; dim];
    for _ in 0..count {
        let id = p.string()?;
        for x in &mut row {
            *x = f32::from_le_bytes(p.array()?);
        }
        store.insert_f32(&id, &row).map_err(|e| Error::format(path, e.to_string()))?;
    }
    if !p.rest().is_empty() {
        return Err(Error::format(path, "trailing bytes after the last record"));
    }
    Ok(store)
}

pub fn write_store(path: &Path, store: &EmbeddingStore) -> Result<()> {
    write_bytes(path, &encode_store(store))
}

pub fn read_store(path: &Path) -> Result<EmbeddingStore> {
    decode_store(&read_bytes(path)?, path)
}
