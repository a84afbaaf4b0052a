//! Encoder-style transformer: pre-norm residual blocks, learned absolute
//! positions, optional factorized token embeddings, and an output projection
//! tied to the token embedding.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::math;
use crate::rng::{self, Rng};
use crate::tensor::{Tape, Tensor, Var};
use crate::{Error, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    /// Inner size `E` of a factorized `V×E · E×d` token embedding.
    pub embed_factor: Option<usize>,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Six layers, twelve heads, 768 wide, 3072 feed-forward, 512 positions.
    pub fn full_scale(vocab_size: usize) -> Self {
        ModelConfig {
            n_layers: 6,
            n_heads: 12,
            d_model: 768,
            d_ff: 3072,
            max_len: 512,
            vocab_size,
            embed_factor: None,
            dropout: 0.1,
            seed: 0,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_layers == 0 || self.n_heads == 0 || self.d_model == 0 || self.d_ff == 0 {
            return bad("n_layers, n_heads, d_model and d_ff must be positive".to_string());
        }
        if self.max_len == 0 || self.vocab_size == 0 {
            return bad("max_len and vocab_size must be positive".to_string());
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return bad(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            ));
        }
        if let Some(e) = self.embed_factor {
            if e == 0 || e >= self.d_model {
                return bad(format!("embed_factor {e} must be in 1..d_model ({})", self.d_model));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} must be in [0, 1)", self.dropout));
        }
        Ok(())
    }

    /// Closed-form number of learnable scalars.
    pub fn param_count(&self) -> usize {
        let (v, d, f) = (self.vocab_size, self.d_model, self.d_ff);
        let embed = match self.embed_factor {
            Some(e) => v * e + e * d,
            None => v * d,
        };
        let per_layer = 4 * d * d + 4 * d + 2 * d * f + f + d + 4 * d;
        embed + self.max_len * d + self.n_layers * per_layer + 2 * d + v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub ln1_gain: T,
    pub ln1_bias: T,
    pub wq: T,
    pub bq: T,
    pub wk: T,
    pub bk: T,
    pub wv: T,
    pub bv: T,
    pub wo: T,
    pub bo: T,
    pub ln2_gain: T,
    pub ln2_bias: T,
    pub w1: T,
    pub b1: T,
    pub w2: T,
    pub b2: T,
}

const LAYER_FIELDS: [&str; 16] = [
    "ln1_gain", "ln1_bias", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_gain",
    "ln2_bias", "w1", "b1", "w2", "b2",
];

impl<T> LayerParams<T> {
    fn fields(&self) -> [&T; 16] {
        [
            &self.ln1_gain, &self.ln1_bias, &self.wq, &self.bq, &self.wk, &self.bk, &self.wv,
            &self.bv, &self.wo, &self.bo, &self.ln2_gain, &self.ln2_bias, &self.w1, &self.b1,
            &self.w2, &self.b2,
        ]
    }

    fn fields_mut(&mut self) -> [&mut T; 16] {
        [
            &mut self.ln1_gain, &mut self.ln1_bias, &mut self.wq, &mut self.bq, &mut self.wk,
            &mut self.bk, &mut self.wv, &mut self.bv, &mut self.wo, &mut self.bo,
            &mut self.ln2_gain, &mut self.ln2_bias, &mut self.w1, &mut self.b1, &mut self.w2,
            &mut self.b2,
        ]
    }

    fn from_fields(mut it: impl Iterator<Item = T>) -> Self {
        let mut next = || it.next().expect("layer field count");
        LayerParams {
            ln1_gain: next(),
            ln1_bias: next(),
            wq: next(),
            bq: next(),
            wk: next(),
            bk: next(),
            wv: next(),
            bv: next(),
            wo: next(),
            bo: next(),
            ln2_gain: next(),
            ln2_bias: next(),
            w1: next(),
            b1: next(),
            w2: next(),
            b2: next(),
        }
    }
}

/// Every learnable parameter of the model, generic over the slot type so the
/// same layout holds tensors, tape handles, gradients or optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub tok_embed: T,
    pub embed_proj: Option<T>,
    pub pos_embed: T,
    pub layers: Vec<LayerParams<T>>,
    pub final_ln_gain: T,
    pub final_ln_bias: T,
    pub out_bias: T,
}

pub type TransformerWeights = Params<Tensor>;

impl<T> Params<T> {
    /// Parameter names and slots in the fixed serialization order.
    pub fn entries(&self) -> Vec<(String, &T)> {
        let mut out = vec![("tok_embed".to_string(), &self.tok_embed)];
        if let Some(p) = &self.embed_proj {
            out.push(("embed_proj".to_string(), p));
        }
        out.push(("pos_embed".to_string(), &self.pos_embed));
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, slot) in LAYER_FIELDS.iter().zip(layer.fields()) {
                out.push((format!("layers.{l}.{name}"), slot));
            }
        }
        out.push(("final_ln_gain".to_string(), &self.final_ln_gain));
        out.push(("final_ln_bias".to_string(), &self.final_ln_bias));
        out.push(("out_bias".to_string(), &self.out_bias));
        out
    }

    pub fn slots_mut(&mut self) -> Vec<&mut T> {
        let mut out = vec![&mut self.tok_embed];
        if let Some(p) = &mut self.embed_proj {
            out.push(p);
        }
        out.push(&mut self.pos_embed);
        for layer in &mut self.layers {
            out.extend(layer.fields_mut());
        }
        out.push(&mut self.final_ln_gain);
        out.push(&mut self.final_ln_bias);
        out.push(&mut self.out_bias);
        out
    }

    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> Result<U>) -> Result<Params<U>> {
        let mapped: Result<Vec<U>> = self.entries().into_iter().map(|(n, t)| f(&n, t)).collect();
        Ok(self.rebuild(mapped?))
    }

    /// Reassembles a parameter set of the same layout from slots listed in
    /// [`Params::entries`] order.
    pub fn rebuild<U>(&self, slots: Vec<U>) -> Params<U> {
        let mut it = slots.into_iter();
        let tok_embed = it.next().expect("slot count");
        let embed_proj = self.embed_proj.as_ref().map(|_| it.next().expect("slot count"));
        let pos_embed = it.next().expect("slot count");
        let layers = self
            .layers
            .iter()
            .map(|_| LayerParams::from_fields(it.by_ref().take(LAYER_FIELDS.len())))
            .collect();
        Params {
            tok_embed,
            embed_proj,
            pos_embed,
            layers,
            final_ln_gain: it.next().expect("slot count"),
            final_ln_bias: it.next().expect("slot count"),
            out_bias: it.next().expect("slot count"),
        }
    }
}

impl Params<Tensor> {
    pub fn param_count(&self) -> usize {
        self.entries().iter().map(|(_, t)| t.len()).sum()
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.entries()
            .into_iter()
            .find(|(_, t)| !t.all_finite())
            .map(|(n, _)| n)
    }

    /// Zeroes the final layer-norm gain and the output bias, which makes
    /// every logit zero and the predictive distribution uniform.
    pub fn zero_output_head(&mut self) {
        self.final_ln_gain.data_mut().iter_mut().for_each(|x| *x = 0.0);
        self.out_bias.data_mut().iter_mut().for_each(|x| *x = 0.0);
    }

    /// Registers every tensor as a differentiable leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Params<Var> {
        self.map(|_, t| Ok(tape.param(t.clone()))).expect("infallible")
    }

    /// Registers every tensor as a constant (no gradients).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Params<Var> {
        self.map(|_, t| Ok(tape.constant(t.clone()))).expect("infallible")
    }
}

fn trunc_normal(shape: &[usize], rng: &mut Rng) -> Tensor {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut t = Tensor::zeros(shape);
    for x in t.data_mut() {
        *x = loop {
            let s: f64 = normal.sample(rng);
            if s.abs() <= 2.0 * INIT_STD {
                break s;
            }
        };
    }
    t
}

/// Truncated-normal (std 0.02, cut at two std) matrices, zero biases, unit
/// layer-norm gains. Deterministic in `cfg.seed`.
pub fn init_weights(cfg: &ModelConfig) -> Result<TransformerWeights> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    let (v, d, f) = (cfg.vocab_size, cfg.d_model, cfg.d_ff);
    let (tok_embed, embed_proj) = match cfg.embed_factor {
        Some(e) => (trunc_normal(&[v, e], &mut rng), Some(trunc_normal(&[e, d], &mut rng))),
        None => (trunc_normal(&[v, d], &mut rng), None),
    };
    let pos_embed = trunc_normal(&[cfg.max_len, d], &mut rng);
    let layers = (0..cfg.n_layers)
        .map(|_| LayerParams {
            ln1_gain: Tensor::filled(&[d], 1.0),
            ln1_bias: Tensor::zeros(&[d]),
            wq: trunc_normal(&[d, d], &mut rng),
            bq: Tensor::zeros(&[d]),
            wk: trunc_normal(&[d, d], &mut rng),
            bk: Tensor::zeros(&[d]),
            wv: trunc_normal(&[d, d], &mut rng),
            bv: Tensor::zeros(&[d]),
            wo: trunc_normal(&[d, d], &mut rng),
            bo: Tensor::zeros(&[d]),
            ln2_gain: Tensor::filled(&[d], 1.0),
            ln2_bias: Tensor::zeros(&[d]),
            w1: trunc_normal(&[d, f], &mut rng),
            b1: Tensor::zeros(&[f]),
            w2: trunc_normal(&[f, d], &mut rng),
            b2: Tensor::zeros(&[d]),
        })
        .collect();
    Ok(Params {
        tok_embed,
        embed_proj,
        pos_embed,
        layers,
        final_ln_gain: Tensor::filled(&[d], 1.0),
        final_ln_bias: Tensor::zeros(&[d]),
        out_bias: Tensor::zeros(&[v]),
    })
}

/// Which key positions each query position may attend to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    len: usize,
    allowed: Vec<bool>,
}

impl AttentionMask {
    /// Row-major `len×len` allow matrix; every row needs at least one allowed key.
    pub fn new(len: usize, allowed: Vec<bool>) -> Result<Self> {
        if allowed.len() != len * len || len == 0 {
            return Err(Error::Shape {
                op: "attention_mask",
                left: vec![len, len],
                right: vec![allowed.len()],
            });
        }
        if let Some(r) = (0..len).find(|&r| !allowed[r * len..(r + 1) * len].iter().any(|&a| a)) {
            return Err(Error::InvalidConfig(format!("attention row {r} denies every position")));
        }
        Ok(AttentionMask { len, allowed })
    }

    pub fn from_fn(len: usize, f: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let allowed = (0..len * len).map(|k| f(k / len, k % len)).collect();
        Self::new(len, allowed)
    }

    pub fn bidirectional(len: usize) -> Self {
        AttentionMask { len, allowed: vec![true; len * len] }
    }

    /// Bidirectional over real tokens; padded keys are never attended.
    pub fn with_padding(is_real: &[bool]) -> Result<Self> {
        Self::from_fn(is_real.len(), |_, j| is_real[j])
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn allows(&self, query: usize, key: usize) -> bool {
        self.allowed[query * self.len + key]
    }

    /// Additive score bias: 0 where allowed, `-inf` where denied.
    pub fn bias(&self) -> Tensor {
        let data = self
            .allowed
            .iter()
            .map(|&a| if a { 0.0 } else { f64::NEG_INFINITY })
            .collect();
        Tensor::new(vec![self.len, self.len], data).expect("square mask")
    }
}

#[derive(Debug, Clone)]
pub struct ForwardVars {
    /// Last hidden layer (after the final layer norm), `T×d`.
    pub hidden: Var,
    pub logits: Var,
    /// `attentions[layer][head]` post-softmax weights, `T×T`.
    pub attentions: Vec<Vec<Var>>,
    /// Output of layer 0's attention sublayer (before the residual add).
    pub first_attention_output: Var,
}

/// Token embedding rows for `ids`, projected to `d_model` when factorized.
pub fn embed_tokens(tape: &mut Tape, p: &Params<Var>, ids: &[usize]) -> Result<Var> {
    let tok = tape.gather(p.tok_embed, ids)?;
    match p.embed_proj {
        Some(proj) => tape.matmul(tok, proj),
        None => Ok(tok),
    }
}

fn dropout(tape: &mut Tape, x: Var, p: f64, rng: Option<&mut Rng>) -> Result<Var> {
    let Some(rng) = rng else { return Ok(x) };
    if p <= 0.0 {
        return Ok(x);
    }
    let shape = tape.value(x).shape().to_vec();
    let keep = 1.0 / (1.0 - p);
    let mut m = Tensor::zeros(&shape);
    for v in m.data_mut() {
        *v = if rng.random::<f64>() < p { 0.0 } else { keep };
    }
    let mv = tape.constant(m);
    tape.mul(x, mv)
}

/// Records one forward pass on `tape`. Dropout is applied only when `rng`
/// is given.
pub fn forward(
    tape: &mut Tape,
    p: &Params<Var>,
    cfg: &ModelConfig,
    ids: &[usize],
    mask: &AttentionMask,
    mut rng: Option<&mut Rng>,
) -> Result<ForwardVars> {
    let t = ids.len();
    if t == 0 {
        return Err(Error::EmptyInput("token ids"));
    }
    if t > cfg.max_len {
        return Err(Error::SequenceTooLong { len: t, max_len: cfg.max_len });
    }
    if let Some(&bad) = ids.iter().find(|&&i| i >= cfg.vocab_size) {
        return Err(Error::IndexOutOfRange { what: "token id", index: bad, len: cfg.vocab_size });
    }
    if mask.len() != t {
        return Err(Error::Shape {
            op: "forward mask",
            left: vec![t],
            right: vec![mask.len(), mask.len()],
        });
    }
    let positions: Vec<usize> = (0..t).collect();
    let tok = embed_tokens(tape, p, ids)?;
    let pos = tape.gather(p.pos_embed, &positions)?;
    let mut x = tape.add(tok, pos)?;
    x = dropout(tape, x, cfg.dropout, rng.as_deref_mut())?;

    let bias = tape.constant(mask.bias());
    let dk = cfg.head_dim();
    let scale = 1.0 / math::sqrt(dk as f64);
    let mut attentions = Vec::with_capacity(cfg.n_layers);
    let mut first_attention_output = None;
    for layer in &p.layers {
        let h = tape.layer_norm(x, layer.ln1_gain, layer.ln1_bias, LAYER_NORM_EPS)?;
        let q = tape.matmul(h, layer.wq)?;
        let q = tape.add_row(q, layer.bq)?;
        let k = tape.matmul(h, layer.wk)?;
        let k = tape.add_row(k, layer.bk)?;
        let v = tape.matmul(h, layer.wv)?;
        let v = tape.add_row(v, layer.bv)?;
        let mut heads = Vec::with_capacity(cfg.n_heads);
        let mut probs = Vec::with_capacity(cfg.n_heads);
        for head in 0..cfg.n_heads {
            let qh = tape.slice_cols(q, head * dk, dk)?;
            let kh = tape.slice_cols(k, head * dk, dk)?;
            let vh = tape.slice_cols(v, head * dk, dk)?;
            let scores = tape.matmul_bt(qh, kh)?;
            let scores = tape.scale(scores, scale);
            let scores = tape.add(scores, bias)?;
            let pr = tape.softmax(scores, 1)?;
            heads.push(tape.matmul(pr, vh)?);
            probs.push(pr);
        }
        let cat = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? };
        let attn = tape.matmul(cat, layer.wo)?;
        let attn = tape.add_row(attn, layer.bo)?;
        first_attention_output.get_or_insert(attn);
        let attn = dropout(tape, attn, cfg.dropout, rng.as_deref_mut())?;
        x = tape.add(x, attn)?;

        let h2 = tape.layer_norm(x, layer.ln2_gain, layer.ln2_bias, LAYER_NORM_EPS)?;
        let f = tape.matmul(h2, layer.w1)?;
        let f = tape.add_row(f, layer.b1)?;
        let f = tape.gelu(f);
        let f = tape.matmul(f, layer.w2)?;
        let f = tape.add_row(f, layer.b2)?;
        let f = dropout(tape, f, cfg.dropout, rng.as_deref_mut())?;
        x = tape.add(x, f)?;
        attentions.push(probs);
    }
    let hidden = tape.layer_norm(x, p.final_ln_gain, p.final_ln_bias, LAYER_NORM_EPS)?;
    let logits = match p.embed_proj {
        Some(proj) => {
            let down = tape.matmul_bt(hidden, proj)?;
            tape.matmul_bt(down, p.tok_embed)?
        }
        None => tape.matmul_bt(hidden, p.tok_embed)?,
    };
    let logits = tape.add_row(logits, p.out_bias)?;
    Ok(ForwardVars {
        hidden,
        logits,
        attentions,
        first_attention_output: first_attention_output.expect("at least one layer"),
    })
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    pub hidden: Tensor,
    pub logits: Tensor,
    pub attentions: Vec<Vec<Tensor>>,
}

/// Inference-mode forward pass (no dropout, no gradients).
pub fn run(
    w: &TransformerWeights,
    cfg: &ModelConfig,
    ids: &[usize],
    mask: &AttentionMask,
) -> Result<ForwardOutput> {
    let mut tape = Tape::new();
    let p = w.bind_frozen(&mut tape);
    let out = forward(&mut tape, &p, cfg, ids, mask, None)?;
    Ok(ForwardOutput {
        hidden: tape.value(out.hidden).clone(),
        logits: tape.value(out.logits).clone(),
        attentions: out
            .attentions
            .iter()
            .map(|l| l.iter().map(|&a| tape.value(a).clone()).collect())
            .collect(),
    })
}

/// One head's attention matrix under the bidirectional mask, for export.
pub fn export_attention(
    w: &TransformerWeights,
    cfg: &ModelConfig,
    ids: &[usize],
    layer: usize,
    head: usize,
) -> Result<Tensor> {
    if layer >= cfg.n_layers {
        return Err(Error::IndexOutOfRange { what: "layer", index: layer, len: cfg.n_layers });
    }
    if head >= cfg.n_heads {
        return Err(Error::IndexOutOfRange { what: "head", index: head, len: cfg.n_heads });
    }
    let out = run(w, cfg, ids, &AttentionMask::bidirectional(ids.len()))?;
    Ok(out.attentions[layer][head].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(vocab: usize) -> ModelConfig {
        ModelConfig {
            n_layers: 2,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            max_len: 12,
            vocab_size: vocab,
            embed_factor: None,
            dropout: 0.0,
            seed: 3,
        }
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = tiny(20);
        assert_eq!(init_weights(&cfg).unwrap(), init_weights(&cfg).unwrap());
        let other = ModelConfig { seed: 4, ..cfg.clone() };
        assert_ne!(init_weights(&cfg).unwrap(), init_weights(&other).unwrap());
    }

    #[test]
    fn param_count_matches_closed_form() {
        for embed_factor in [None, Some(4)] {
            let cfg = ModelConfig { embed_factor, ..tiny(20) };
            assert_eq!(init_weights(&cfg).unwrap().param_count(), cfg.param_count());
        }
    }

    #[test]
    fn full_scale_count_is_tens_of_millions() {
        let cfg = ModelConfig::full_scale(30000);
        // 30000·768 + 512·768 + 6·7_087_872 + 2·768 + 30000
        assert_eq!(cfg.param_count(), 65_991_984);
        let albert = ModelConfig { embed_factor: Some(128), ..cfg.clone() };
        assert!(albert.param_count() < cfg.param_count());
        assert_eq!(cfg.param_count() - albert.param_count(), 30000 * 768 - (30000 * 128 + 128 * 768));
    }

    #[test]
    fn weights_within_truncation() {
        let w = init_weights(&tiny(20)).unwrap();
        assert!(w.wq_max_abs() <= 2.0 * INIT_STD);
        assert!(w.layers[0].bq.data().iter().all(|&x| x == 0.0));
        assert!(w.final_ln_bias.data().iter().all(|&x| x == 0.0));
    }

    impl Params<Tensor> {
        fn wq_max_abs(&self) -> f64 {
            self.layers[0].wq.data().iter().fold(0.0f64, |m, x| m.max(x.abs()))
        }
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig { n_heads: 3, ..tiny(10) }.validate().is_err());
        assert!(ModelConfig { embed_factor: Some(8), ..tiny(10) }.validate().is_err());
        assert!(ModelConfig { embed_factor: Some(0), ..tiny(10) }.validate().is_err());
        assert!(tiny(10).validate().is_ok());
    }

    #[test]
    fn single_token_attention_is_one() {
        let cfg = tiny(10);
        let w = init_weights(&cfg).unwrap();
        let out = run(&w, &cfg, &[5], &AttentionMask::bidirectional(1)).unwrap();
        for layer in &out.attentions {
            for a in layer {
                assert_eq!(a.data(), &[1.0]);
            }
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let cfg = tiny(10);
        let w = init_weights(&cfg).unwrap();
        let out = run(&w, &cfg, &[3, 4, 5, 6, 7], &AttentionMask::bidirectional(5)).unwrap();
        for a in out.attentions.iter().flatten() {
            for r in 0..5 {
                assert!((a.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn padding_content_is_invisible() {
        let cfg = tiny(10);
        let w = init_weights(&cfg).unwrap();
        let real = [true, false, true, true, false];
        let mask = AttentionMask::with_padding(&real).unwrap();
        let a = run(&w, &cfg, &[3, 0, 5, 6, 0], &mask).unwrap();
        let b = run(&w, &cfg, &[3, 9, 5, 6, 7], &mask).unwrap();
        for (i, &r) in real.iter().enumerate() {
            if r {
                for (x, y) in a.logits.row(i).iter().zip(b.logits.row(i)) {
                    assert!((x - y).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn denied_cells_are_exactly_zero() {
        let cfg = tiny(10);
        let w = init_weights(&cfg).unwrap();
        let mask = AttentionMask::from_fn(4, |i, j| j <= i).unwrap();
        let out = run(&w, &cfg, &[3, 4, 5, 6], &mask).unwrap();
        for a in out.attentions.iter().flatten() {
            for i in 0..4 {
                for j in i + 1..4 {
                    assert_eq!(a.at(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn mask_rejects_empty_rows() {
        assert!(AttentionMask::from_fn(3, |i, j| j < i).is_err());
    }

    #[test]
    fn forward_errors() {
        let cfg = tiny(10);
        let w = init_weights(&cfg).unwrap();
        let long: Vec<usize> = vec![3; 13];
        assert!(matches!(
            run(&w, &cfg, &long, &AttentionMask::bidirectional(13)),
            Err(Error::SequenceTooLong { .. })
        ));
        assert!(matches!(
            run(&w, &cfg, &[3, 10], &AttentionMask::bidirectional(2)),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn export_bounds_and_determinism() {
        let cfg = tiny(10);
        let w = init_weights(&cfg).unwrap();
        assert!(export_attention(&w, &cfg, &[3, 4], 2, 0).is_err());
        assert!(export_attention(&w, &cfg, &[3, 4], 0, 2).is_err());
        let a = export_attention(&w, &cfg, &[3, 4, 5], 1, 1).unwrap();
        assert_eq!(a, export_attention(&w, &cfg, &[3, 4, 5], 1, 1).unwrap());
    }

    #[test]
    fn zero_output_head_gives_uniform_logits() {
        let cfg = tiny(10);
        let mut w = init_weights(&cfg).unwrap();
        w.zero_output_head();
        let out = run(&w, &cfg, &[3, 4, 5], &AttentionMask::bidirectional(3)).unwrap();
        assert!(out.logits.data().iter().all(|&x| x == 0.0));
    }
}
