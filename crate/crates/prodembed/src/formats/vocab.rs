//! BPE vocabulary as JSON:
//!
//! ```json
//! {"vocab": {"[PAD]": 0, "[UNK]": 1, "[MASK]": 2, "a": 3, ...},
//!  "merges": [["a", "b</w>"], ...]}
//! ```
//!
//! Ids must be dense from 0; merges are in learning order.

use std::path::Path;

use prodembed_core::tokenizer::BpeVocab;
use serde_json::{json, Map, Value};

use super::{read_text, write_bytes};
use crate::{Error, Result};

pub fn render_vocab(v: &BpeVocab) -> String {
    let vocab: Map<String, Value> = v.tokens().iter().enumerate().map(|(i, t)| (t.clone(), json!(i))).collect();
    let merges: Vec<Value> = v.merges().iter().map(|(a, b)| json!([a, b])).collect();
    let mut s = serde_json::to_string_pretty(&json!({ "vocab": vocab, "merges": merges })).expect("json values serialize");
    s.push('\n');
    s
}

pub fn parse_vocab(text: &str, path: &Path) -> Result<BpeVocab> {
    let bad = |m: &str| Error::format(path, m.to_string());
    let root: Value = serde_json::from_str(text).map_err(|e| Error::format(path, format!("invalid JSON: {e}")))?;
    let vocab = root.get("vocab").and_then(Value::as_object).ok_or_else(|| bad("missing object \"vocab\""))?;
    let mut tokens: Vec<Option<String>> = vec![None; vocab.len()];
    for (tok, id) in vocab {
        let id = id.as_u64().ok_or_else(|| bad("vocab ids must be non-negative integers"))? as usize;
        match tokens.get_mut(id) {
            Some(slot @ None) => *slot = Some(tok.clone()),
            _ => return Err(Error::format(path, format!("vocab id {id} is duplicated or not dense"))),
        }
    }
    let tokens: Vec<String> = tokens.into_iter().map(|t| t.expect("dense ids")).collect();
    let merges = root.get("merges").and_then(Value::as_array).ok_or_else(|| bad("missing array \"merges\""))?;
    let merges = merges
        .iter()
        .map(|m| match m.as_array().map(Vec::as_slice) {
            Some([Value::String(a), Value::String(b)]) => Ok((a.clone(), b.clone())),
            _ => Err(bad("each merge must be a pair of strings")),
        })
        .collect::<Result<Vec<_>>>()?;
    BpeVocab::from_parts(tokens, merges).map_err(|e| Error::format(path, e.to_string()))
}

pub fn read_vocab(path: &Path) -> Result<BpeVocab> {
    parse_vocab(&read_text(path)?, path)
}

pub fn write_vocab(path: &Path, v: &BpeVocab) -> Result<()> {
    write_bytes(path, render_vocab(v).as_bytes())
}
