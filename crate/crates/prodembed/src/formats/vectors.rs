//! Word vectors in the common text interchange layout: a `V dim` header,
//! then `token v1 v2 ... v_dim` per line. Values are written in shortest
//! round-trip form, so reading back is exact.

use std::fmt::Write as _;
use std::path::Path;

use prodembed_core::word2vec::WordVectors;

use super::{read_text, write_bytes};
use crate::{Error, Result};

pub fn render_vectors(v: &WordVectors) -> String {
    let mut out = format!("{} {}\n", v.len(), v.dim());
    for tok in v.tokens() {
        out.push_str(tok);
        for x in v.get(tok).expect("own token") {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_vectors(text: &str, path: &Path) -> Result<WordVectors> {
    let mut it = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, head) = it.next().ok_or_else(|| Error::format(path, "empty vector file"))?;
    let nums: Vec<usize> = head.split_whitespace().map(str::parse).collect::<Result<_, _>>().unwrap_or_default();
    let [n, dim] = nums[..] else {
        return Err(Error::parse(path, 1, "header must be `V dim`"));
    };
    let mut rows = Vec::with_capacity(n);
    for (line, l) in it.filter(|(_, l)| !l.trim().is_empty()) {
        let mut f = l.split(' ');
        let tok = f.next().unwrap_or_default().to_string();
        let vals: Vec<f64> = f
            .map(|x| x.parse::<f64>().map_err(|_| Error::parse(path, line, format!("bad number {x:?}"))))
            .collect::<Result<_>>()?;
        if vals.len() != dim {
            return Err(Error::parse(path, line, format!("expected {dim} values, found {}", vals.len())));
        }
        rows.push((tok, vals));
    }
    if rows.len() != n {
        return Err(Error::format(path, format!("header promises {n} vectors, found {}", rows.len())));
    }
    WordVectors::new(dim, rows).map_err(|e| Error::format(path, e.to_string()))
}

pub fn write_vectors(path: &Path, v: &WordVectors) -> Result<()> {
    write_bytes(path, render_vectors(v).as_bytes())
}

pub fn read_vectors(path: &Path) -> Result<WordVectors> {
    parse_vectors(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let v = WordVectors::new(
            2,
            vec![("Red".into(), vec![0.1 + 0.2, -1e-300]), ("Blue".into(), vec![f64::MIN_POSITIVE, 3.0])],
        )
        .unwrap();
        let text = render_vectors(&v);
        assert!(text.starts_with("2 2\nRed 0.30000000000000004 "));
        let back = parse_vectors(&text, Path::new("v.txt")).unwrap();
        assert_eq!(back.get("Red"), v.get("Red"));
        assert_eq!(back.get("Blue"), v.get("Blue"));
        assert_eq!(render_vectors(&back), text);
    }

    #[test]
    fn rejects_inconsistent_files() {
        let p = Path::new("v.txt");
        assert!(parse_vectors("2 2\na 1 2\n", p).is_err());
        assert!(parse_vectors("1 2\na 1\n", p).is_err());
        assert!(parse_vectors("1 2\na 1 x\n", p).is_err());
        assert!(parse_vectors("1\n", p).is_err());
    }
}
