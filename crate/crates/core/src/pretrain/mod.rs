//! Pre-training: objective construction, the AdamW training loop, and
//! corpus perplexity `exp(-(1/t) Σ log P(x_i | context))`.

mod adamw;
mod objective;

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::math;
use crate::model::{self, ModelConfig, TransformerWeights};
use crate::rng;
use crate::tensor::Tape;
use crate::{Error, Result};

pub use adamw::{AdamW, AdamWConfig};
pub use objective::{
    apply_mlm_masking, build_plm_batch, make_example, permutation_mask, plm_batch_from_order,
    predict_count, Example, MlmBatch, Objective, ObjectiveConfig, PlmBatch,
};

/// Runs independent per-item work, returning results in index order.
///
/// Implementations may run items concurrently; because results come back in
/// order and are reduced sequentially, the outcome does not depend on it.
pub trait Executor {
    fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

/// Summed negative log-likelihood of one example and its gradient, one
/// buffer per parameter in [`crate::model::Params::entries`] order.
#[derive(Debug, Clone)]
pub struct ExampleGrad {
    pub nll_sum: f64,
    pub count: usize,
    pub grads: Vec<Vec<f64>>,
}

/// Forward + backward of one example. Dropout is active iff `dropout_seed`
/// is given.
pub fn example_gradient(
    w: &TransformerWeights,
    cfg: &ModelConfig,
    ex: &Example,
    dropout_seed: Option<u64>,
) -> Result<ExampleGrad> {
    let mut tape = Tape::new();
    let p = w.bind(&mut tape);
    let mut drop_rng = dropout_seed.map(rng::seeded);
    let out = model::forward(&mut tape, &p, cfg, &ex.input, &ex.mask, drop_rng.as_mut())?;
    let ce = tape.cross_entropy(out.logits, &ex.targets, Some(&ex.scored))?;
    let count = ex.scored_count();
    let loss = tape.scale(ce, count as f64);
    tape.backward(loss)?;
    let grads = p
        .entries()
        .into_iter()
        .map(|(_, &v)| tape.grad_or_zeros(v).into_data())
        .collect();
    Ok(ExampleGrad { nll_sum: tape.value(loss).data()[0], count, grads })
}

/// Summed NLL and scored-token count of one example (inference mode).
pub fn example_nll(w: &TransformerWeights, cfg: &ModelConfig, ex: &Example) -> Result<(f64, usize)> {
    let mut tape = Tape::new();
    let p = w.bind_frozen(&mut tape);
    let out = model::forward(&mut tape, &p, cfg, &ex.input, &ex.mask, None)?;
    let ce = tape.cross_entropy(out.logits, &ex.targets, Some(&ex.scored))?;
    let count = ex.scored_count();
    Ok((tape.value(ce).data()[0] * count as f64, count))
}

/// One optimizer step on a batch: token-averaged loss, backward, AdamW.
///
/// Returns the batch's mean per-token loss. The averaged gradient is
/// rescaled to global L2 norm `clip_norm` when it exceeds it. A non-finite
/// loss aborts before the update, naming the first parameter whose gradient
/// overflowed.
#[allow(clippy::too_many_arguments)]
pub fn train_step<E: Executor>(
    w: &mut TransformerWeights,
    cfg: &ModelConfig,
    opt: &mut AdamW,
    batch: &[Example],
    dropout_seeds: Option<&[u64]>,
    lr: f64,
    clip_norm: Option<f64>,
    exec: &E,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("training batch"));
    }
    let weights: &TransformerWeights = w;
    let parts = exec.map(batch.len(), |i| {
        example_gradient(weights, cfg, &batch[i], dropout_seeds.map(|s| s[i]))
    })?;
    let total: usize = parts.iter().map(|p| p.count).sum();
    let nll: f64 = parts.iter().map(|p| p.nll_sum).sum();
    let mut grads = parts[0].grads.clone();
    for p in &parts[1..] {
        for (acc, g) in grads.iter_mut().zip(&p.grads) {
            for (a, x) in acc.iter_mut().zip(g) {
                *a += x;
            }
        }
    }
    let scale = 1.0 / total as f64;
    grads.iter_mut().flatten().for_each(|g| *g *= scale);
    let loss = nll * scale;

    let names = w.entries().into_iter().map(|(n, _)| n).collect::<Vec<_>>();
    if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
        let param = names
            .iter()
            .zip(&grads)
            .find(|(_, g)| g.iter().any(|x| !x.is_finite()))
            .map_or_else(|| "loss".to_string(), |(n, _)| n.clone());
        return Err(Error::NonFinite { param: format!("{param} (loss {loss})") });
    }
    if let Some(c) = clip_norm {
        let norm = math::sqrt(grads.iter().flatten().map(|g| g * g).sum());
        if norm > c {
            grads.iter_mut().flatten().for_each(|g| *g *= c / norm);
        }
    }
    opt.update(w.slots_mut(), &grads, lr);
    if let Some(param) = w.first_non_finite() {
        return Err(Error::NonFinite { param });
    }
    Ok(loss)
}

/// Linear warmup over the first `warmup_frac` of steps, then linear decay
/// towards zero.
pub fn learning_rate(step: usize, total_steps: usize, peak: f64, warmup_frac: f64) -> f64 {
    let total = total_steps.max(1);
    let warm = (math::round(warmup_frac * total as f64) as usize).clamp(1, total);
    if step < warm {
        peak * (step + 1) as f64 / warm as f64
    } else if total == warm {
        peak
    } else {
        peak * (total - step.min(total - 1)) as f64 / (total - warm) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityResult {
    pub nll_sum: f64,
    pub count: usize,
}

impl PerplexityResult {
    pub fn mean_loss(&self) -> f64 {
        self.nll_sum / self.count as f64
    }

    pub fn perplexity(&self) -> f64 {
        math::exp(self.mean_loss())
    }
}

/// Corpus perplexity with fixed-seed masks (MLM) or orders (PLM); example
/// `i` uses seed `derive_seed(seed, i)`. Sequences too short for the
/// objective are skipped.
pub fn perplexity<E: Executor>(
    w: &TransformerWeights,
    cfg: &ModelConfig,
    seqs: &[Vec<usize>],
    ocfg: &ObjectiveConfig,
    seed: u64,
    exec: &E,
) -> Result<PerplexityResult> {
    let parts = exec.map(seqs.len(), |i| {
        match make_example(&seqs[i], ocfg, rng::derive_seed(seed, i as u64)) {
            Ok(ex) => example_nll(w, cfg, &ex),
            Err(Error::EmptyInput(_)) => Ok((0.0, 0)),
            Err(e) => Err(e),
        }
    })?;
    let nll_sum: f64 = parts.iter().map(|p| p.0).sum();
    let count: usize = parts.iter().map(|p| p.1).sum();
    if count == 0 {
        return Err(Error::EmptyInput("perplexity: no scored tokens"));
    }
    Ok(PerplexityResult { nll_sum, count })
}

const STATIC_STREAM: u64 = 0x5EED_5747_1C00_0000;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_frac: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub adamw: AdamWConfig,
    pub seed: u64,
    /// Seed for the fixed evaluation masks/orders.
    pub eval_seed: u64,
    /// Draw each example's mask or order once and reuse it every epoch
    /// instead of redrawing per epoch.
    pub static_masks: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: ObjectiveConfig::mlm(),
            epochs: 2,
            batch_size: 8,
            lr: 1e-3,
            warmup_frac: 0.1,
            clip_norm: Some(1.0),
            adamw: AdamWConfig::default(),
            seed: 0,
            eval_seed: 12345,
            static_masks: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-token loss on the training set under the fixed eval masks.
    pub train_loss: f64,
    pub train_ppl: f64,
    pub test_loss: Option<f64>,
    pub test_ppl: Option<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Mean per-token loss of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    pub config: TrainConfig,
    pub model: ModelConfig,
}

/// Trains `w` in place. `clock` returns seconds since an arbitrary origin
/// and only feeds the report's wall times.
pub fn pretrain<E: Executor>(
    w: &mut TransformerWeights,
    cfg: &ModelConfig,
    train: &[Vec<usize>],
    test: &[Vec<usize>],
    tcfg: &TrainConfig,
    exec: &E,
    clock: &dyn Fn() -> f64,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    if tcfg.batch_size == 0 || tcfg.epochs == 0 {
        return Err(Error::InvalidConfig("epochs and batch_size must be positive".to_string()));
    }
    let train: Vec<&Vec<usize>> = train.iter().filter(|s| s.len() >= 2).collect();
    if train.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    if let Some(s) = train.iter().find(|s| s.len() > cfg.max_len) {
        return Err(Error::SequenceTooLong { len: s.len(), max_len: cfg.max_len });
    }
    let train_owned: Vec<Vec<usize>> = train.iter().map(|s| (*s).clone()).collect();
    let steps_per_epoch = train.len().div_ceil(tcfg.batch_size);
    let total_steps = steps_per_epoch * tcfg.epochs;
    let mut opt = AdamW::new(tcfg.adamw, w.entries().into_iter().map(|(_, t)| t));
    let mut step = 0;
    let mut step_losses = Vec::with_capacity(total_steps);
    let mut epochs = Vec::with_capacity(tcfg.epochs);
    let start = clock();

    for epoch in 0..tcfg.epochs {
        let epoch_seed = rng::derive_seed(tcfg.seed, epoch as u64);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng::seeded(rng::derive_seed(epoch_seed, u64::MAX)));
        for chunk in order.chunks(tcfg.batch_size) {
            let mut batch = Vec::with_capacity(chunk.len());
            let mut drop_seeds = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let s = rng::derive_seed(epoch_seed, i as u64);
                let mask_seed = if tcfg.static_masks { rng::derive_seed(tcfg.seed ^ STATIC_STREAM, i as u64) } else { s };
                batch.push(make_example(train[i], &tcfg.objective, mask_seed)?);
                drop_seeds.push(rng::derive_seed(s, 1));
            }
            let lr = learning_rate(step, total_steps, tcfg.lr, tcfg.warmup_frac);
            let loss = train_step(w, cfg, &mut opt, &batch, Some(&drop_seeds), lr, tcfg.clip_norm, exec)?;
            step_losses.push(loss);
            step += 1;
        }
        let tr = perplexity(w, cfg, &train_owned, &tcfg.objective, tcfg.eval_seed, exec)?;
        let te = if test.is_empty() {
            None
        } else {
            Some(perplexity(w, cfg, test, &tcfg.objective, tcfg.eval_seed, exec)?)
        };
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: tr.mean_loss(),
            train_ppl: tr.perplexity(),
            test_loss: te.map(|t| t.mean_loss()),
            test_ppl: te.map(|t| t.perplexity()),
            wall_seconds: clock() - start,
        };
        on_epoch(&record);
        epochs.push(record);
    }
    Ok(TrainReport { epochs, step_losses, config: tcfg.clone(), model: cfg.clone() })
}

/// Tokenized paragraphs truncated to `max_len`, dropping sequences shorter
/// than two tokens.
pub fn prepare_sequences(encoded: impl IntoIterator<Item = Vec<usize>>, max_len: usize) -> Vec<Vec<usize>> {
    encoded
        .into_iter()
        .map(|mut s| {
            s.truncate(max_len);
            s
        })
        .filter(|s| s.len() >= 2)
        .collect()
}

/// Per-step loss windows used to judge convergence: mean of the first and
/// last `window` steps.
pub fn loss_window_means(losses: &[f64], window: usize) -> Option<(f64, f64)> {
    if losses.len() < window || window == 0 {
        return None;
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Some((mean(&losses[..window]), mean(&losses[losses.len() - window..])))
}
