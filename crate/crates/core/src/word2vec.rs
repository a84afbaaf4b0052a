//! Skip-gram with negative sampling over whitespace-split session text.
//!
//! Plain SGD, single-threaded. Center word `c` and context word `o`
//! contribute `−log σ(u_o·v_c) − Σ log σ(−u_n·v_c)` with `n` drawn from the
//! unigram distribution raised to 0.75. Frequent words are subsampled as in
//! the reference tool: a word of corpus frequency `f` is kept with
//! probability `(√(f/s) + 1)·s/f`, redrawn every epoch.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::math;
use crate::rng;
use crate::tensor::kernels::dot;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct W2VConfig {
    pub dim: usize,
    pub min_count: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    /// Initial learning rate, decayed linearly to `lr0 · 1e-4`.
    pub lr0: f64,
    pub seed: u64,
    pub table_size: usize,
    /// Subsampling threshold `s`; 0 keeps every word.
    pub sample: f64,
}

impl Default for W2VConfig {
    fn default() -> Self {
        W2VConfig {
            dim: 768,
            min_count: 20,
            epochs: 5,
            window: 5,
            negatives: 5,
            lr0: 0.025,
            seed: 0,
            table_size: 1_000_000,
            sample: 1e-3,
        }
    }
}

impl W2VConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig(
                "dim, window, negatives and epochs must be positive".to_string(),
            ));
        }
        if self.table_size == 0 || !(self.lr0 >= 0.0) || !(self.sample >= 0.0) {
            return Err(Error::InvalidConfig(
                "table_size must be positive, lr0 and sample non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct W2VVocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    ids: BTreeMap<String, usize>,
}

impl W2VVocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }
}

/// Tokens occurring at least `min_count` times, most frequent first (ties
/// in lexicographic order).
pub fn build_vocab<S: AsRef<str>>(paragraphs: &[S], min_count: usize) -> Result<W2VVocab> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for p in paragraphs {
        for w in p.as_ref().split_whitespace() {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyInput("word2vec corpus"));
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count as u64)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyInput("word2vec vocabulary after min_count filtering"));
    }
    // stable sort keeps the BTreeMap's lexicographic order among equal counts
    kept.sort_by(|a, b| b.1.cmp(&a.1));
    let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    Ok(W2VVocab { tokens, counts: kept.iter().map(|&(_, c)| c).collect(), ids })
}

/// Table of word ids where id `i` fills a share of slots proportional to
/// `count_i^0.75`.
pub fn negative_table(counts: &[u64], size: usize) -> Vec<u32> {
    let weights: Vec<f64> = counts.iter().map(|&c| math::powf(c as f64, 0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut table = Vec::with_capacity(size);
    let mut word = 0;
    let mut cum = weights[0] / total;
    for slot in 0..size {
        table.push(word as u32);
        if (slot + 1) as f64 / size as f64 > cum && word + 1 < weights.len() {
            word += 1;
            cum += weights[word] / total;
        }
    }
    table
}

/// Read-only word vectors (the input matrix of a trained model).
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    dim: usize,
    tokens: Vec<String>,
    ids: BTreeMap<String, usize>,
    data: Vec<f64>,
}

impl WordVectors {
    pub fn new(dim: usize, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("word vector dim must be positive".to_string()));
        }
        let mut tokens = Vec::with_capacity(rows.len());
        let mut ids = BTreeMap::new();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (t, v) in rows {
            if v.len() != dim {
                return Err(Error::Mismatch(format!("vector for {t:?} has {} values, expected {dim}", v.len())));
            }
            if ids.insert(t.clone(), tokens.len()).is_some() {
                return Err(Error::Mismatch(format!("duplicate word {t:?}")));
            }
            tokens.push(t);
            data.extend(v);
        }
        Ok(WordVectors { dim, tokens, ids, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        let i = *self.ids.get(token)?;
        Some(&self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// The word's vector, or a zero vector and `true` when out of vocabulary.
    pub fn word_vector(&self, token: &str) -> (Vec<f64>, bool) {
        match self.get(token) {
            Some(v) => (v.to_vec(), false),
            None => (vec![0.0; self.dim], true),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct W2VModel {
    pub vocab: W2VVocab,
    pub dim: usize,
    /// `V×dim`, row-major; these are the word vectors.
    pub input: Vec<f64>,
    /// `V×dim` context vectors.
    pub output: Vec<f64>,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl W2VModel {
    pub fn row(&self, id: usize) -> &[f64] {
        &self.input[id * self.dim..(id + 1) * self.dim]
    }

    pub fn word_vector(&self, token: &str) -> (Vec<f64>, bool) {
        match self.vocab.id(token) {
            Some(i) => (self.row(i).to_vec(), false),
            None => (vec![0.0; self.dim], true),
        }
    }

    pub fn vectors(&self) -> WordVectors {
        WordVectors {
            dim: self.dim,
            tokens: self.vocab.tokens.clone(),
            ids: self.vocab.ids.clone(),
            data: self.input.clone(),
        }
    }
}

/// Input rows uniform in `±0.5/dim`, output rows zero.
pub fn init_model(vocab: W2VVocab, cfg: &W2VConfig) -> W2VModel {
    let mut r = rng::seeded(cfg.seed);
    let n = vocab.len() * cfg.dim;
    let input = (0..n)
        .map(|_| (r.random::<f64>() - 0.5) / cfg.dim as f64)
        .collect();
    W2VModel { vocab, dim: cfg.dim, input, output: vec![0.0; n], epoch_losses: Vec::new() }
}

pub fn train_skipgram<S: AsRef<str>>(paragraphs: &[S], cfg: &W2VConfig) -> Result<W2VModel> {
    cfg.validate()?;
    let vocab = build_vocab(paragraphs, cfg.min_count)?;
    let table = negative_table(vocab.counts(), cfg.table_size);
    let sentences: Vec<Vec<usize>> = paragraphs
        .iter()
        .map(|p| p.as_ref().split_whitespace().filter_map(|w| vocab.id(w)).collect())
        .collect();
    let keep = keep_probabilities(vocab.counts(), cfg.sample);
    let mut model = init_model(vocab, cfg);
    // the learning rate decays with corpus positions visited, discarded ones included
    let total = (sentences.iter().map(Vec::len).sum::<usize>() * cfg.epochs).max(1);
    let mut rng = rng::seeded(rng::derive_seed(cfg.seed, 1));
    let d = cfg.dim;
    let mut grad = vec![0.0; d];
    let mut done = 0usize;
    for _ in 0..cfg.epochs {
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for full in &sentences {
            let s: Vec<usize> = match &keep {
                None => full.clone(),
                Some(k) => full.iter().copied().filter(|&w| k[w] >= 1.0 || rng.random::<f64>() < k[w]).collect(),
            };
            let lr = cfg.lr0 * (1.0 - done as f64 / total as f64).max(1e-4);
            done += full.len();
            for (i, &center) in s.iter().enumerate() {
                for j in context_range(i, s.len(), cfg.window) {
                    if j == i {
                        continue;
                    }
                    pairs += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let v = center * d..(center + 1) * d;
                    for n in 0..=cfg.negatives {
                        let (target, label) = if n == 0 {
                            (s[j], 1.0)
                        } else {
                            let t = table[rng.random_range(0..table.len())] as usize;
                            if t == s[j] {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let u = target * d..(target + 1) * d;
                        let score = dot(&model.input[v.clone()], &model.output[u.clone()]);
                        loss -= if label > 0.0 { math::log_sigmoid(score) } else { math::log_sigmoid(-score) };
                        let g = lr * (label - math::sigmoid(score));
                        for k in 0..d {
                            grad[k] += g * model.output[u.start + k];
                            model.output[u.start + k] += g * model.input[v.start + k];
                        }
                    }
                    for (x, g) in model.input[v].iter_mut().zip(&grad) {
                        *x += g;
                    }
                }
            }
        }
        model.epoch_losses.push(loss / pairs.max(1) as f64);
    }
    if model.input.iter().chain(&model.output).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { param: "word2vec matrices".to_string() });
    }
    Ok(model)
}

/// Per-word keep probability under subsampling threshold `sample`, or
/// `None` when subsampling is off.
pub fn keep_probabilities(counts: &[u64], sample: f64) -> Option<Vec<f64>> {
    if sample <= 0.0 {
        return None;
    }
    let total = counts.iter().sum::<u64>() as f64;
    Some(
        counts
            .iter()
            .map(|&c| {
                let r = c as f64 / (sample * total);
                (math::sqrt(r) + 1.0) / r
            })
            .collect(),
    )
}

fn context_range(i: usize, len: usize, window: usize) -> core::ops::Range<usize> {
    i.saturating_sub(window)..(i + window + 1).min(len)
}
