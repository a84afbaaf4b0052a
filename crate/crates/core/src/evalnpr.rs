//! Next-product recommendation: rank the true next product of a session
//! against 20 same-category, same-gender negatives by cosine with the
//! session vector, and report the mean reciprocal rank.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::corpus::{Catalog, Session};
use crate::embed::{cosine, lookup_all, session_vector, VectorLookup};
use crate::pretrain::Executor;
use crate::rng;
use crate::{Error, Result};

pub const DEFAULT_NEGATIVES: usize = 20;

/// Time-ordered products of one session that share category and gender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalSession {
    pub product_ids: Vec<String>,
    pub category: String,
    pub gender: String,
}

/// Splits each session into homogeneous (category, gender) groups and keeps
/// groups with at least three distinct products. A product seen twice in a
/// group keeps its first position.
pub fn build_eval_sessions(sessions: &[Session], catalog: &Catalog) -> Result<Vec<EvalSession>> {
    let mut out = Vec::new();
    for s in sessions {
        let mut groups: Vec<EvalSession> = Vec::new();
        for e in s.sorted_events() {
            let p = catalog.resolve(&e.product_id)?;
            let g = match groups
                .iter_mut()
                .position(|g| g.category == p.category() && g.gender == p.gender())
            {
                Some(i) => &mut groups[i],
                None => {
                    groups.push(EvalSession {
                        product_ids: Vec::new(),
                        category: p.category().into(),
                        gender: p.gender().into(),
                    });
                    groups.last_mut().expect("just pushed")
                }
            };
            if !g.product_ids.contains(&p.id) {
                g.product_ids.push(p.id.clone());
            }
        }
        out.extend(groups.into_iter().filter(|g| g.product_ids.len() >= 3));
    }
    Ok(out)
}

/// Product ids of each (category, gender) group in catalog order.
#[derive(Debug, Clone)]
pub struct CandidatePools {
    pools: BTreeMap<(String, String), Vec<String>>,
}

impl CandidatePools {
    pub fn new(catalog: &Catalog) -> Self {
        let mut pools: BTreeMap<(String, String), Vec<String>> = BTreeMap::new();
        for p in catalog.products() {
            pools
                .entry((p.category().into(), p.gender().into()))
                .or_default()
                .push(p.id.clone());
        }
        CandidatePools { pools }
    }

    pub fn pool(&self, category: &str, gender: &str) -> &[String] {
        self.pools
            .get(&(category.into(), gender.into()))
            .map_or(&[], |v| v.as_slice())
    }
}

/// `k` products drawn uniformly without replacement from the (category,
/// gender) pool minus `exclude`. `None` when fewer than `k` remain.
pub fn sample_negatives(
    pools: &CandidatePools,
    category: &str,
    gender: &str,
    exclude: &[String],
    k: usize,
    seed: u64,
) -> Option<Vec<String>> {
    let mut pool: Vec<String> = pools
        .pool(category, gender)
        .iter()
        .filter(|id| !exclude.contains(id))
        .cloned()
        .collect();
    if pool.len() < k {
        return None;
    }
    pool.shuffle(&mut rng::seeded(seed));
    pool.truncate(k);
    Some(pool)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NprQuery {
    pub session_idx: usize,
    /// First `n−1` products, averaged into the session vector.
    pub context: Vec<String>,
    /// The `n`-th product.
    pub positive: String,
    pub negatives: Vec<String>,
}

/// One query per eval session; session `i` samples negatives with seed
/// `derive_seed(seed, i)`. Returns the queries and the number skipped for
/// lack of negatives.
pub fn build_queries(evals: &[EvalSession], catalog: &Catalog, k: usize, seed: u64) -> (Vec<NprQuery>, usize) {
    let pools = CandidatePools::new(catalog);
    let mut queries = Vec::new();
    let mut skipped = 0;
    for (i, e) in evals.iter().enumerate() {
        let (positive, context) = e.product_ids.split_last().expect("eval sessions have 3+ products");
        match sample_negatives(&pools, &e.category, &e.gender, &e.product_ids, k, rng::derive_seed(seed, i as u64)) {
            Some(negatives) => queries.push(NprQuery {
                session_idx: i,
                context: context.to_vec(),
                positive: positive.clone(),
                negatives,
            }),
            None => skipped += 1,
        }
    }
    (queries, skipped)
}

/// Orders `(id, score)` by descending score, ties by ascending id.
pub fn sort_by_score(scored: &mut [(String, f64)]) {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
}

/// 1-based rank of the positive among itself and the negatives.
pub fn rank_query<L: VectorLookup + ?Sized>(q: &NprQuery, store: &L) -> Result<usize> {
    let sv = session_vector(&lookup_all(store, &q.context)?)?;
    let mut scored: Vec<(String, f64)> = Vec::with_capacity(q.negatives.len() + 1);
    for id in core::iter::once(&q.positive).chain(&q.negatives) {
        let v = store.vector(id).ok_or_else(|| Error::MissingEmbedding(id.clone()))?;
        scored.push((id.clone(), cosine(&sv, &v)));
    }
    sort_by_score(&mut scored);
    Ok(scored.iter().position(|(id, _)| *id == q.positive).expect("positive is a candidate") + 1)
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("ranks"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Expected reciprocal rank of a uniformly random rank among `n` candidates.
pub fn random_mrr(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum::<f64>() / n as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRank {
    pub session_idx: usize,
    pub positive: String,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrrReport {
    pub records: Vec<QueryRank>,
    pub mrr: f64,
    pub queries: usize,
    pub skipped: usize,
    pub eval_sessions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NprConfig {
    pub negatives: usize,
    pub seed: u64,
}

impl Default for NprConfig {
    fn default() -> Self {
        NprConfig { negatives: DEFAULT_NEGATIVES, seed: 0 }
    }
}

pub fn evaluate_npr<L: VectorLookup + Sync + ?Sized, E: Executor>(
    sessions: &[Session],
    catalog: &Catalog,
    store: &L,
    cfg: &NprConfig,
    exec: &E,
) -> Result<MrrReport> {
    let evals = build_eval_sessions(sessions, catalog)?;
    let (queries, skipped) = build_queries(&evals, catalog, cfg.negatives, cfg.seed);
    let ranks = exec.map(queries.len(), |i| rank_query(&queries[i], store))?;
    let records: Vec<QueryRank> = queries
        .iter()
        .zip(&ranks)
        .map(|(q, &rank)| QueryRank { session_idx: q.session_idx, positive: q.positive.clone(), rank })
        .collect();
    Ok(MrrReport {
        mrr: mrr(&ranks)?,
        queries: records.len(),
        records,
        skipped,
        eval_sessions: evals.len(),
    })
}
