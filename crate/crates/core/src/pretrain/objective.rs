//! Masked and permutation language-modeling example construction.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::math;
use crate::model::AttentionMask;
use crate::rng;
use crate::tokenizer::{is_special, MASK_ID};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Mlm,
    Plm,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Mlm => "mlm",
            Objective::Plm => "plm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "mlm" => Some(Objective::Mlm),
            "plm" => Some(Objective::Plm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub objective: Objective,
    pub mask_prob: f64,
    pub predict_fraction: f64,
}

impl ObjectiveConfig {
    pub fn mlm() -> Self {
        ObjectiveConfig { objective: Objective::Mlm, mask_prob: 0.15, predict_fraction: 1.0 / 6.0 }
    }

    pub fn plm() -> Self {
        ObjectiveConfig { objective: Objective::Plm, ..Self::mlm() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlmBatch {
    /// Ids with `[MASK]` substituted at every masked position.
    pub input_ids: Vec<usize>,
    /// Original id at masked positions, `None` elsewhere.
    pub labels: Vec<Option<usize>>,
    pub mask_positions: Vec<usize>,
}

/// Masks each non-special position independently with probability `p`,
/// replacing it by `[MASK]`. Redraws until at least one position is masked.
pub fn apply_mlm_masking(ids: &[usize], p: f64, seed: u64) -> Result<MlmBatch> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("mask probability {p} not in (0, 1)")));
    }
    if ids.is_empty() {
        return Err(Error::EmptyInput("mlm token ids"));
    }
    let eligible: Vec<usize> = (0..ids.len()).filter(|&i| !is_special(ids[i])).collect();
    if eligible.is_empty() {
        return Err(Error::EmptyInput("mlm: every position is a special token"));
    }
    let mut rng = rng::seeded(seed);
    let mask_positions = loop {
        let picked: Vec<usize> = eligible
            .iter()
            .copied()
            .filter(|_| rng.random::<f64>() < p)
            .collect();
        if !picked.is_empty() {
            break picked;
        }
    };
    let mut input_ids = ids.to_vec();
    let mut labels = vec![None; ids.len()];
    for &i in &mask_positions {
        labels[i] = Some(ids[i]);
        input_ids[i] = MASK_ID;
    }
    Ok(MlmBatch { input_ids, labels, mask_positions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlmBatch {
    pub input_ids: Vec<usize>,
    /// `order[r]` is the position with factorization rank `r`.
    pub order: Vec<usize>,
    /// `rank[i]` is the factorization rank of position `i`.
    pub rank: Vec<usize>,
    /// Positions in the last `ceil(c·T)` ranks.
    pub predict: Vec<bool>,
    pub mask: AttentionMask,
}

impl PlmBatch {
    /// Positions that contribute to the loss: predicted and with at least one
    /// lower-rank position to condition on.
    pub fn scored(&self) -> Vec<bool> {
        self.predict
            .iter()
            .zip(&self.rank)
            .map(|(&p, &r)| p && r > 0)
            .collect()
    }

    /// What the model reads: predicted positions keep their position but lose
    /// their content (`[MASK]`), so the residual stream cannot copy the target.
    pub fn model_input(&self) -> Vec<usize> {
        self.input_ids
            .iter()
            .zip(&self.predict)
            .map(|(&id, &p)| if p { MASK_ID } else { id })
            .collect()
    }
}

/// Number of predicted ranks for a length-`t` sequence.
pub fn predict_count(t: usize, c: f64) -> usize {
    // guard against 1/6·12 = 2.0000000000000004
    (math::ceil(c * t as f64 - 1e-9) as usize).clamp(1, t)
}

/// Permuted-causality mask: `i` attends `j` iff `rank[j] < rank[i]`. The
/// rank-0 position has no earlier context and attends only to itself; it is
/// never scored.
pub fn permutation_mask(rank: &[usize]) -> Result<AttentionMask> {
    AttentionMask::from_fn(rank.len(), |i, j| rank[j] < rank[i] || (rank[i] == 0 && i == j))
}

pub fn plm_batch_from_order(ids: &[usize], order: Vec<usize>, c: f64) -> Result<PlmBatch> {
    let t = ids.len();
    if t < 2 {
        return Err(Error::EmptyInput("plm needs at least two tokens"));
    }
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("predict fraction {c} not in (0, 1]")));
    }
    let mut rank = vec![usize::MAX; t];
    for (r, &pos) in order.iter().enumerate() {
        if pos >= t || rank[pos] != usize::MAX {
            return Err(Error::InvalidConfig("factorization order is not a permutation".into()));
        }
        rank[pos] = r;
    }
    if order.len() != t {
        return Err(Error::InvalidConfig("factorization order is not a permutation".into()));
    }
    let first_predicted = t - predict_count(t, c);
    let predict = rank.iter().map(|&r| r >= first_predicted).collect();
    let mask = permutation_mask(&rank)?;
    Ok(PlmBatch { input_ids: ids.to_vec(), order, rank, predict, mask })
}

/// Samples a uniform factorization order and predicts its last `ceil(c·T)`
/// ranks.
pub fn build_plm_batch(ids: &[usize], seed: u64, c: f64) -> Result<PlmBatch> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    plm_batch_from_order(ids, order, c)
}

/// One sequence prepared for the model: what it reads, what it predicts,
/// and what it may attend to.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub input: Vec<usize>,
    pub targets: Vec<usize>,
    pub scored: Vec<bool>,
    pub mask: AttentionMask,
}

impl Example {
    pub fn scored_count(&self) -> usize {
        self.scored.iter().filter(|&&s| s).count()
    }
}

impl From<MlmBatch> for Example {
    fn from(b: MlmBatch) -> Self {
        let t = b.input_ids.len();
        Example {
            targets: b.labels.iter().map(|l| l.unwrap_or(0)).collect(),
            scored: b.labels.iter().map(|l| l.is_some()).collect(),
            input: b.input_ids,
            mask: AttentionMask::bidirectional(t),
        }
    }
}

impl From<PlmBatch> for Example {
    fn from(b: PlmBatch) -> Self {
        Example {
            input: b.model_input(),
            scored: b.scored(),
            targets: b.input_ids,
            mask: b.mask,
        }
    }
}

pub fn make_example(ids: &[usize], cfg: &ObjectiveConfig, seed: u64) -> Result<Example> {
    match cfg.objective {
        Objective::Mlm => apply_mlm_masking(ids, cfg.mask_prob, seed).map(Into::into),
        Objective::Plm => build_plm_batch(ids, seed, cfg.predict_fraction).map(Into::into),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{PAD_ID, UNK_ID};

    #[test]
    fn mlm_rate_near_p() {
        let ids: Vec<usize> = (0..10_000).map(|i| 3 + i % 50).collect();
        let b = apply_mlm_masking(&ids, 0.15, 11).unwrap();
        let frac = b.mask_positions.len() as f64 / ids.len() as f64;
        assert!((0.14..=0.16).contains(&frac), "{frac}");
    }

    #[test]
    fn mlm_skips_specials_and_is_deterministic() {
        let ids = [PAD_ID, 5, UNK_ID, 6, MASK_ID, 7, PAD_ID];
        let b = apply_mlm_masking(&ids, 0.999_999, 2).unwrap();
        assert_eq!(b.mask_positions, [1, 3, 5]);
        for (i, l) in b.labels.iter().enumerate() {
            assert_eq!(l.is_some(), b.mask_positions.contains(&i));
        }
        assert_eq!(b, apply_mlm_masking(&ids, 0.999_999, 2).unwrap());
        assert!(apply_mlm_masking(&[PAD_ID, UNK_ID], 0.5, 0).is_err());
        assert!(apply_mlm_masking(&[5], 0.0, 0).is_err());
    }

    #[test]
    fn mlm_always_masks_something() {
        for seed in 0..50 {
            let b = apply_mlm_masking(&[7, 8], 0.01, seed).unwrap();
            assert!(!b.mask_positions.is_empty());
        }
    }

    #[test]
    fn identity_order_is_causal() {
        let b = plm_batch_from_order(&[5, 6, 7, 8], (0..4).collect(), 1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expected = j < i || (i == 0 && j == 0);
                assert_eq!(b.mask.allows(i, j), expected, "({i},{j})");
            }
        }
        assert_eq!(b.scored(), [false, true, true, true]);
    }

    #[test]
    fn three_token_example() {
        // order (3,1,2) in 1-based positions
        let b = plm_batch_from_order(&[5, 6, 7], vec![2, 0, 1], 1.0).unwrap();
        let allowed = |i: usize| (0..3).filter(|&j| b.mask.allows(i, j)).collect::<Vec<_>>();
        assert_eq!(allowed(0), [2]);
        assert_eq!(allowed(1), [0, 2]);
        assert_eq!(allowed(2), [2]);
        assert_eq!(b.scored(), [true, true, false]);
    }

    #[test]
    fn plm_errors_and_predict_count() {
        assert!(build_plm_batch(&[5], 0, 0.5).is_err());
        assert!(build_plm_batch(&[5, 6], 0, 0.0).is_err());
        assert!(plm_batch_from_order(&[5, 6], vec![0, 0], 1.0).is_err());
        assert_eq!(predict_count(12, 1.0 / 6.0), 2);
        assert_eq!(predict_count(13, 1.0 / 6.0), 3);
        assert_eq!(predict_count(3, 1.0 / 6.0), 1);
    }

    #[test]
    fn plm_inputs_hide_predicted_content() {
        let b = build_plm_batch(&[5, 6, 7, 8, 9, 10], 4, 0.5).unwrap();
        let ex: Example = b.clone().into();
        for i in 0..6 {
            assert_eq!(ex.input[i] == MASK_ID, b.predict[i]);
            assert_eq!(ex.targets[i], b.input_ids[i]);
        }
        assert_eq!(ex.scored_count(), 3);
    }
}
