//! Posts ranking: cluster a user's engaged-post history with Ward linkage,
//! average the most recent cluster medoids into a user vector, rank the
//! user's evaluation posts by cosine, and score with NDCG.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{Post, UserHistory};
use crate::embed::{cosine, lookup_all, post_embedding, user_embedding, VectorLookup};
use crate::evalnpr::sort_by_score;
use crate::math;
use crate::pretrain::Executor;
use crate::{Error, Result};

pub const DEFAULT_TOP_K: usize = 10;
pub const ENGAGED_GAIN: f64 = 3.0;
pub const VIEWED_GAIN: f64 = 1.0;
const YEAR_SECONDS: i64 = 365 * 24 * 3600;

/// One agglomeration step: slot `right` is folded into slot `left`
/// (`left < right`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    /// Size of the merged cluster.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    /// Member indices of each surviving cluster, ordered by their slot.
    pub clusters: Vec<Vec<usize>>,
    pub merges: Vec<Merge>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Agglomerative Ward clustering with a distance-threshold stop.
///
/// Squared merge costs are updated with the Lance–Williams recurrence,
/// starting from squared Euclidean distances; the reported merge distance
/// is its square root. The closest pair of live slots is merged while that
/// distance is at most `threshold`; ties go to the smallest `(i, j)`.
pub fn ward_cluster<V: AsRef<[f64]>>(vectors: &[V], threshold: f64) -> Result<ClusterSet> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("vectors to cluster"));
    }
    if !(threshold > 0.0) {
        return Err(Error::InvalidConfig(format!("distance threshold {threshold} must be positive")));
    }
    let n = vectors.len();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(vectors[i].as_ref(), vectors[j].as_ref());
            d2[i * n + j] = d;
            d2[j * n + i] = d;
        }
    }
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut live = vec![true; n];
    let mut merges = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in (0..n).filter(|&i| live[i]) {
            for j in (i + 1..n).filter(|&j| live[j]) {
                if best.is_none_or(|(_, _, b)| d2[i * n + j] < b) {
                    best = Some((i, j, d2[i * n + j]));
                }
            }
        }
        let Some((i, j, dij)) = best else { break };
        let distance = math::sqrt(dij);
        if distance > threshold {
            break;
        }
        let (ni, nj) = (members[i].len() as f64, members[j].len() as f64);
        for k in (0..n).filter(|&k| live[k] && k != i && k != j) {
            let nk = members[k].len() as f64;
            let v = ((ni + nk) * d2[i * n + k] + (nj + nk) * d2[j * n + k] - nk * dij) / (ni + nj + nk);
            let v = v.max(0.0);
            d2[i * n + k] = v;
            d2[k * n + i] = v;
        }
        live[j] = false;
        let moved = core::mem::take(&mut members[j]);
        members[i].extend(moved);
        members[i].sort_unstable();
        merges.push(Merge { left: i, right: j, distance, size: members[i].len() });
    }
    let clusters = members.into_iter().zip(&live).filter(|(_, &l)| l).map(|(m, _)| m).collect();
    Ok(ClusterSet { clusters, merges })
}

/// Index of the member with the smallest summed Euclidean distance to the
/// others; ties go to the smallest id.
pub fn medoid<V: AsRef<[f64]>, S: AsRef<str>>(vectors: &[V], ids: &[S]) -> Result<usize> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("cluster members"));
    }
    if ids.len() != vectors.len() {
        return Err(Error::Shape { op: "medoid", left: vec![vectors.len()], right: vec![ids.len()] });
    }
    let cost = |i: usize| -> f64 {
        vectors
            .iter()
            .map(|v| math::sqrt(sq_dist(vectors[i].as_ref(), v.as_ref())))
            .sum()
    };
    let mut best = 0;
    let mut best_cost = cost(0);
    for i in 1..vectors.len() {
        let c = cost(i);
        if c < best_cost || (c == best_cost && ids[i].as_ref() < ids[best].as_ref()) {
            best = i;
            best_cost = c;
        }
    }
    Ok(best)
}

/// The `k` most recently engaged medoids, newest first; ties by id.
pub fn top_k_medoids(medoids: &[(String, i64)], k: usize) -> Vec<String> {
    let mut m = medoids.to_vec();
    m.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    m.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Candidate ids by descending cosine with `user`, ties by id.
pub fn rank_posts<V: AsRef<[f64]>>(user: &[f64], candidates: &[(String, V)]) -> Vec<String> {
    let mut scored: Vec<(String, f64)> = candidates
        .iter()
        .map(|(id, v)| (id.clone(), cosine(user, v.as_ref())))
        .collect();
    sort_by_score(&mut scored);
    scored.into_iter().map(|(id, _)| id).collect()
}

/// NDCG with gain `2^rel − 1` for relevance 2 (engaged) and 1 (viewed) and
/// discount `log2(rank + 1)`; the ideal list is engaged then viewed.
pub fn ndcg<S: AsRef<str>>(ranked: &[S], engaged: &BTreeSet<String>, viewed: &BTreeSet<String>) -> Result<f64> {
    if engaged.iter().any(|e| viewed.contains(e)) {
        return Err(Error::Mismatch("a post is both engaged and viewed".into()));
    }
    let seen: BTreeSet<&str> = ranked.iter().map(|s| s.as_ref()).collect();
    let expected = engaged.len() + viewed.len();
    if seen.len() != ranked.len()
        || ranked.len() != expected
        || !seen.iter().all(|s| engaged.contains(*s) || viewed.contains(*s))
    {
        return Err(Error::Mismatch("ranked list is not a permutation of engaged and viewed posts".into()));
    }
    if expected == 0 {
        return Err(Error::EmptyInput("ranked posts"));
    }
    let discount = |r: usize| 1.0 / math::log2(r as f64 + 2.0);
    let dcg: f64 = ranked
        .iter()
        .enumerate()
        .map(|(r, id)| {
            let g = if engaged.contains(id.as_ref()) { ENGAGED_GAIN } else { VIEWED_GAIN };
            g * discount(r)
        })
        .sum();
    let idcg: f64 = (0..expected)
        .map(|r| if r < engaged.len() { ENGAGED_GAIN } else { VIEWED_GAIN } * discount(r))
        .sum();
    Ok(dcg / idcg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankConfig {
    pub threshold: f64,
    pub k: usize,
    /// Engagements at or after this time are held out for ranking.
    pub test_start: i64,
    /// Length of the history window before `test_start`, in seconds.
    pub history_window: i64,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig { threshold: 1.0, k: DEFAULT_TOP_K, test_start: 1_700_000_000, history_window: YEAR_SECONDS }
    }
}

/// A user's history split into clustering input and ranking targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSplit {
    /// Engaged posts in the history window with their latest timestamp.
    pub history: Vec<(String, i64)>,
    pub test_engaged: BTreeSet<String>,
    /// Viewed posts never engaged with.
    pub test_viewed: BTreeSet<String>,
}

pub fn split_history(h: &UserHistory, cfg: &RankConfig) -> UserSplit {
    let mut latest: BTreeMap<&str, i64> = BTreeMap::new();
    for (p, ts) in &h.engaged {
        let e = latest.entry(p.as_str()).or_insert(*ts);
        *e = (*e).max(*ts);
    }
    let start = cfg.test_start.saturating_sub(cfg.history_window);
    let history = latest
        .iter()
        .filter(|&(_, &ts)| ts >= start && ts < cfg.test_start)
        .map(|(p, &ts)| (String::from(*p), ts))
        .collect();
    let test_engaged = latest
        .iter()
        .filter(|&(_, &ts)| ts >= cfg.test_start)
        .map(|(p, _)| String::from(*p))
        .collect();
    let test_viewed = h
        .viewed
        .iter()
        .filter(|p| !latest.contains_key(p.as_str()))
        .cloned()
        .collect();
    UserSplit { history, test_engaged, test_viewed }
}

/// Cluster history → medoids → top-k → user vector → rank → NDCG.
/// `None` when the user has no history, no held-out engaged post, or no
/// viewed post.
pub fn evaluate_user<L: VectorLookup + ?Sized>(h: &UserHistory, posts: &L, cfg: &RankConfig) -> Result<Option<f64>> {
    let split = split_history(h, cfg);
    if split.history.is_empty() || split.test_engaged.is_empty() || split.test_viewed.is_empty() {
        return Ok(None);
    }
    let ids: Vec<String> = split.history.iter().map(|(p, _)| p.clone()).collect();
    let vecs = lookup_all(posts, &ids)?;
    let clusters = ward_cluster(&vecs, cfg.threshold)?;
    let mut medoids = Vec::with_capacity(clusters.clusters.len());
    for members in &clusters.clusters {
        let mv: Vec<&[f64]> = members.iter().map(|&m| vecs[m].as_slice()).collect();
        let mi: Vec<&str> = members.iter().map(|&m| ids[m].as_str()).collect();
        let m = members[medoid(&mv, &mi)?];
        medoids.push(split.history[m].clone());
    }
    let top = top_k_medoids(&medoids, cfg.k);
    let user = user_embedding(&lookup_all(posts, &top)?)?;
    let cands: Vec<String> = split.test_engaged.iter().chain(&split.test_viewed).cloned().collect();
    let cvecs = lookup_all(posts, &cands)?;
    let candidates: Vec<(String, Vec<f64>)> = cands.into_iter().zip(cvecs).collect();
    let ranked = rank_posts(&user, &candidates);
    ndcg(&ranked, &split.test_engaged, &split.test_viewed).map(Some)
}

/// Post vectors as the mean of their tagged products' vectors.
pub fn post_vectors<L: VectorLookup + ?Sized>(posts: &[Post], products: &L) -> Result<BTreeMap<String, Vec<f64>>> {
    posts
        .iter()
        .map(|p| Ok((p.id.clone(), post_embedding(&lookup_all(products, &p.product_ids)?)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdcgReport {
    pub records: Vec<(String, f64)>,
    pub mean: f64,
    pub users: usize,
    pub skipped: usize,
}

pub fn evaluate_rank<L: VectorLookup + Sync + ?Sized, E: Executor>(
    histories: &[UserHistory],
    posts: &L,
    cfg: &RankConfig,
    exec: &E,
) -> Result<NdcgReport> {
    let scores = exec.map(histories.len(), |i| evaluate_user(&histories[i], posts, cfg))?;
    let records: Vec<(String, f64)> = histories
        .iter()
        .zip(&scores)
        .filter_map(|(h, s)| s.map(|s| (h.user_id.clone(), s)))
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyInput("no user met the ranking preconditions"));
    }
    let mean = records.iter().map(|r| r.1).sum::<f64>() / records.len() as f64;
    Ok(NdcgReport { users: records.len(), skipped: histories.len() - records.len(), records, mean })
}
