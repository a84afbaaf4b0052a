//! Byte-pair-encoding subword tokenizer over whitespace-split words.
//!
//! Words are split into characters, the last of which carries the
//! end-of-word suffix [`END_OF_WORD`]; merges are learned greedily by pair
//! frequency. Ids 0, 1 and 2 are reserved for `[PAD]`, `[UNK]`, `[MASK]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{Error, Result};

pub const END_OF_WORD: &str = "</w>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const MASK_ID: usize = 2;
pub const SPECIAL_TOKENS: [&str; 3] = ["[PAD]", "[UNK]", "[MASK]"];

pub fn is_special(id: usize) -> bool {
    id < SPECIAL_TOKENS.len()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeVocab {
    tokens: Vec<String>,
    ids: BTreeMap<String, usize>,
    merges: Vec<(String, String)>,
    ranks: BTreeMap<(String, String), usize>,
}

fn word_symbols(word: &str) -> Vec<String> {
    let mut chars: Vec<String> = word.chars().map(|c| c.to_string()).collect();
    if let Some(last) = chars.last_mut() {
        last.push_str(END_OF_WORD);
    }
    chars
}

impl BpeVocab {
    /// Reassembles a vocabulary from its token list (index = id) and merges,
    /// checking the id and merge invariants.
    pub fn from_parts(tokens: Vec<String>, merges: Vec<(String, String)>) -> Result<Self> {
        for (i, s) in SPECIAL_TOKENS.iter().enumerate() {
            if tokens.get(i).map(|t| t.as_str()) != Some(*s) {
                return Err(Error::InvalidConfig(format!("token id {i} must be {s}")));
            }
        }
        let mut ids = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate token {t:?}")));
            }
        }
        let mut ranks = BTreeMap::new();
        for (r, (a, b)) in merges.iter().enumerate() {
            let merged = format!("{a}{b}");
            if !ids.contains_key(a) || !ids.contains_key(b) || !ids.contains_key(&merged) {
                return Err(Error::InvalidConfig(format!(
                    "merge ({a:?}, {b:?}) refers to tokens outside the vocabulary"
                )));
            }
            ranks.entry((a.clone(), b.clone())).or_insert(r);
        }
        Ok(BpeVocab { tokens, ids, merges, ranks })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    /// Token ids for `text`; unknown base symbols map to `[UNK]`.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        let mut out = Vec::new();
        for word in text.split_whitespace() {
            let mut syms = word_symbols(word);
            loop {
                let best = syms
                    .windows(2)
                    .enumerate()
                    .filter_map(|(i, w)| {
                        self.ranks
                            .get(&(w[0].clone(), w[1].clone()))
                            .map(|&r| (r, i))
                    })
                    .min();
                let Some((_, i)) = best else { break };
                let right = syms.remove(i + 1);
                syms[i].push_str(&right);
            }
            out.extend(syms.iter().map(|s| self.id(s).unwrap_or(UNK_ID)));
        }
        out
    }

    /// Concatenates token strings, turning end-of-word suffixes back into
    /// spaces. Specials render as their bracketed names.
    pub fn decode(&self, ids: &[usize]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            let tok = self.token(id).ok_or(Error::IndexOutOfRange {
                what: "token id",
                index: id,
                len: self.len(),
            })?;
            if is_special(id) {
                out.push_str(tok);
                out.push(' ');
            } else if let Some(stem) = tok.strip_suffix(END_OF_WORD) {
                out.push_str(stem);
                out.push(' ');
            } else {
                out.push_str(tok);
            }
        }
        Ok(out.trim_end().to_string())
    }

    /// Human-readable form of one token (suffix stripped).
    pub fn display_token(&self, id: usize) -> String {
        match self.token(id) {
            Some(t) => t.strip_suffix(END_OF_WORD).unwrap_or(t).to_string(),
            None => SPECIAL_TOKENS[UNK_ID].to_string(),
        }
    }
}

/// Learns merges from `paragraphs` until the vocabulary holds `vocab_size`
/// tokens or no adjacent pair occurs at least twice.
///
/// The most frequent pair wins; ties go to the lexicographically smallest
/// pair, so training is deterministic.
pub fn train_bpe<S: AsRef<str>>(paragraphs: &[S], vocab_size: usize) -> Result<BpeVocab> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for p in paragraphs {
        for w in p.as_ref().split_whitespace() {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyInput("tokenizer training corpus"));
    }
    let mut words: Vec<(Vec<String>, usize)> =
        counts.iter().map(|(w, &c)| (word_symbols(w), c)).collect();

    let base: BTreeSet<String> = words.iter().flat_map(|(s, _)| s.iter().cloned()).collect();
    let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
    tokens.extend(base);
    if vocab_size < tokens.len() {
        return Err(Error::InvalidConfig(format!(
            "vocab_size {vocab_size} is smaller than the {} base symbols and specials",
            tokens.len()
        )));
    }
    let mut ids: BTreeMap<String, usize> =
        tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    let mut merges = Vec::new();

    while tokens.len() < vocab_size {
        let mut pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
        for (syms, c) in &words {
            for w in syms.windows(2) {
                *pairs.entry((w[0].as_str(), w[1].as_str())).or_insert(0) += c;
            }
        }
        // BTreeMap iterates in lexicographic order, so the first maximum wins ties.
        let mut best: Option<((&str, &str), usize)> = None;
        for (&pair, &c) in &pairs {
            if best.is_none_or(|(_, bc)| c > bc) {
                best = Some((pair, c));
            }
        }
        let Some(((a, b), count)) = best else { break };
        if count < 2 {
            break;
        }
        let (a, b) = (a.to_string(), b.to_string());
        let merged = format!("{a}{b}");
        for (syms, _) in &mut words {
            let mut i = 0;
            while i + 1 < syms.len() {
                if syms[i] == a && syms[i + 1] == b {
                    syms[i] = merged.clone();
                    syms.remove(i + 1);
                }
                i += 1;
            }
        }
        if !ids.contains_key(&merged) {
            ids.insert(merged.clone(), tokens.len());
            tokens.push(merged);
        }
        merges.push((a, b));
    }
    BpeVocab::from_parts(tokens, merges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_merge_is_most_frequent_pair() {
        // base symbols: a, a</w>, b</w> plus 3 specials => 6
        let v = train_bpe(&["aa aa ab"], 7).unwrap();
        assert_eq!(v.merges(), &[("a".to_string(), "a</w>".to_string())]);
    }

    #[test]
    fn base_budget_means_no_merges() {
        let v = train_bpe(&["aa aa ab"], 6).unwrap();
        assert!(v.merges().is_empty());
        assert_eq!(v.len(), 6);
        assert!(train_bpe(&["aa aa ab"], 5).is_err());
    }

    #[test]
    fn empty_corpus_is_error() {
        assert_eq!(train_bpe::<&str>(&[], 10), Err(Error::EmptyInput("tokenizer training corpus")));
        assert!(train_bpe(&["   "], 10).is_err());
    }

    #[test]
    fn deterministic() {
        let corpus = ["red shirt . blue shirt", "red dress . red heel"];
        assert_eq!(train_bpe(&corpus, 40).unwrap(), train_bpe(&corpus, 40).unwrap());
    }

    #[test]
    fn specials_have_fixed_ids() {
        let v = train_bpe(&["x y"], 10).unwrap();
        assert_eq!(v.id("[PAD]"), Some(PAD_ID));
        assert_eq!(v.id("[UNK]"), Some(UNK_ID));
        assert_eq!(v.id("[MASK]"), Some(MASK_ID));
        assert_eq!(v.decode(&[MASK_ID]).unwrap(), "[MASK]");
    }

    #[test]
    fn encode_decode_basics() {
        let v = train_bpe(&["Shoetopia Women Beige . Roadster Men Blue"], 60).unwrap();
        assert!(v.encode("").is_empty());
        assert_eq!(v.decode(&[]).unwrap(), "");
        let ids = v.encode("Beige   Women");
        assert!(!ids.contains(&UNK_ID));
        assert_eq!(v.decode(&ids).unwrap(), "Beige Women");
        assert!(v.encode("Qz").contains(&UNK_ID));
        assert!(v.decode(&[v.len()]).is_err());
    }

    #[test]
    fn merge_count_matches_budget_when_supported() {
        let corpus = ["abcd abcd abcd efgh efgh efgh abef abef"];
        // 9 base symbols + 3 specials
        let v0 = train_bpe(&corpus, 12).unwrap();
        assert!(v0.merges().is_empty());
        let v = train_bpe(&corpus, 16).unwrap();
        assert_eq!(v.merges().len(), 16 - 12);
    }

    proptest::proptest! {
        #[test]
        fn round_trip(words in proptest::collection::vec("[a-e]{1,6}", 1..30), budget in 0usize..40) {
            let text = words.join(" ");
            let v = train_bpe(&[text.as_str()], 20 + budget)
                .or_else(|_| train_bpe(&[text.as_str()], 200))
                .unwrap();
            let ids = v.encode(&text);
            proptest::prop_assert!(!ids.contains(&UNK_ID));
            proptest::prop_assert!(ids.len() <= text.chars().filter(|c| !c.is_whitespace()).count());
            proptest::prop_assert_eq!(v.decode(&ids).unwrap(), text);
        }
    }
}
