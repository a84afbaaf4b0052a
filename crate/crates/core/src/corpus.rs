//! Catalog and session data model, session-paragraph rendering, and the
//! seeded synthetic data generator used in place of platform logs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::math;
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Catalog-wide attribute order for product sentences. Attributes not named
/// here follow in the order they were given.
pub const ATTRIBUTE_ORDER: [&str; 7] =
    ["brand", "gender", "color", "pattern", "style", "type", "category"];

pub const SENTENCE_SEPARATOR: &str = " . ";
pub const MIN_SESSION_PRODUCTS: usize = 3;
pub const MAX_SESSION_PRODUCTS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Product {
    pub id: String,
    attributes: Vec<(String, String)>,
}

impl Product {
    /// Category and gender are mandatory; the next-product harness groups by them.
    pub fn new(id: impl Into<String>, attributes: Vec<(String, String)>) -> Result<Self> {
        let id = id.into();
        for required in ["category", "gender"] {
            if !attributes.iter().any(|(k, _)| k == required) {
                return Err(Error::InvalidConfig(format!(
                    "product {id:?} is missing the {required:?} attribute"
                )));
            }
        }
        Ok(Product { id, attributes })
    }

    /// Builds a product without the category/gender check.
    pub fn unchecked(id: impl Into<String>, attributes: Vec<(String, String)>) -> Self {
        Product { id: id.into(), attributes }
    }

    pub fn attributes(&self) -> &[(String, String)] {
        &self.attributes
    }

    pub fn attribute(&self, name: &str) -> Option<&str> {
        self.attributes
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn category(&self) -> &str {
        self.attribute("category").unwrap_or("")
    }

    pub fn gender(&self) -> &str {
        self.attribute("gender").unwrap_or("")
    }
}

fn attribute_rank(name: &str) -> usize {
    ATTRIBUTE_ORDER
        .iter()
        .position(|a| *a == name)
        .unwrap_or(ATTRIBUTE_ORDER.len())
}

/// Attribute values joined by single spaces, in catalog order.
pub fn product_sentence(p: &Product) -> String {
    let mut attrs: Vec<&(String, String)> = p.attributes.iter().collect();
    attrs.sort_by_key(|(k, _)| attribute_rank(k));
    let mut out = String::new();
    for (_, v) in attrs {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(v);
    }
    out
}

#[derive(Debug, Clone, Default)]
pub struct Catalog {
    products: Vec<Product>,
    index: BTreeMap<String, usize>,
}

impl Catalog {
    pub fn new(products: Vec<Product>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, p) in products.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate product id {:?}", p.id)));
            }
        }
        Ok(Catalog { products, index })
    }

    pub fn get(&self, id: &str) -> Option<&Product> {
        self.index.get(id).map(|&i| &self.products[i])
    }

    pub fn resolve(&self, id: &str) -> Result<&Product> {
        self.get(id).ok_or_else(|| Error::UnknownProduct(id.to_string()))
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Browse,
    AddToCart,
    Purchase,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Browse => "browse",
            EventKind::AddToCart => "add_to_cart",
            EventKind::Purchase => "purchase",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "browse" => Some(EventKind::Browse),
            "add_to_cart" => Some(EventKind::AddToCart),
            "purchase" => Some(EventKind::Purchase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub product_id: String,
    pub timestamp: i64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub user_id: String,
    pub events: Vec<Event>,
}

impl Session {
    /// Events in timestamp order (stable for equal timestamps).
    pub fn sorted_events(&self) -> Vec<&Event> {
        let mut ev: Vec<&Event> = self.events.iter().collect();
        ev.sort_by_key(|e| e.timestamp);
        ev
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionParagraph {
    pub text: String,
    /// Byte range of each product sentence within `text`.
    pub spans: Vec<Range<usize>>,
    pub product_ids: Vec<String>,
}

/// Renders a session as one paragraph of product sentences.
///
/// Returns `Ok(None)` when the session has fewer than three products; only
/// the first twenty (by timestamp) are kept. Repeated products are kept.
pub fn session_paragraph(s: &Session, catalog: &Catalog) -> Result<Option<SessionParagraph>> {
    let events = s.sorted_events();
    for e in &events {
        catalog.resolve(&e.product_id)?;
    }
    if events.len() < MIN_SESSION_PRODUCTS {
        return Ok(None);
    }
    let mut text = String::new();
    let mut spans = Vec::new();
    let mut product_ids = Vec::new();
    for e in events.into_iter().take(MAX_SESSION_PRODUCTS) {
        if !text.is_empty() {
            text.push_str(SENTENCE_SEPARATOR);
        }
        let start = text.len();
        text.push_str(&product_sentence(catalog.resolve(&e.product_id)?));
        spans.push(start..text.len());
        product_ids.push(e.product_id.clone());
    }
    Ok(Some(SessionParagraph { text, spans, product_ids }))
}

/// Paragraphs for every session that passes the length filter.
pub fn paragraphs(sessions: &[Session], catalog: &Catalog) -> Result<Vec<SessionParagraph>> {
    let mut out = Vec::new();
    for s in sessions {
        if let Some(p) = session_paragraph(s, catalog)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// Deterministic shuffle-then-cut split; `round(fraction · n)` go to train.
pub fn split(sessions: &[Session], train_fraction: f64, seed: u64) -> Result<(Vec<Session>, Vec<Session>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train_fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..sessions.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let n_train = math::round(train_fraction * sessions.len() as f64) as usize;
    let train = order[..n_train].iter().map(|&i| sessions[i].clone()).collect();
    let test = order[n_train..].iter().map(|&i| sessions[i].clone()).collect();
    Ok((train, test))
}

/// Preference distribution over the values of every attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Archetype {
    /// `prefs[a][v]` is the weight of value `v` of attribute `a`; each row sums to 1.
    pub prefs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostsConfig {
    pub n_posts: usize,
    pub n_users: usize,
    pub tags_per_post: (usize, usize),
    pub history_len: (usize, usize),
    pub test_engaged: (usize, usize),
    pub test_viewed: (usize, usize),
    /// Probability that an engaged post comes from the user's own archetype.
    pub affinity: f64,
    /// First timestamp of the evaluation period; history lies in the year before.
    pub test_start: i64,
}

impl Default for PostsConfig {
    fn default() -> Self {
        PostsConfig {
            n_posts: 400,
            n_users: 200,
            tags_per_post: (1, 4),
            history_len: (5, 25),
            test_engaged: (1, 4),
            test_viewed: (2, 8),
            affinity: 0.9,
            test_start: 1_700_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_products: usize,
    pub n_sessions: usize,
    /// Attribute name and its value vocabulary.
    pub attributes: Vec<(String, Vec<String>)>,
    pub n_archetypes: usize,
    /// Fraction of each attribute's values an archetype favours.
    pub focus: f64,
    /// Probability mass an archetype puts on its favoured values.
    pub concentration: f64,
    /// Explicit archetypes; when empty they are drawn from the seed.
    pub archetypes: Vec<Archetype>,
    /// Inclusive range of raw session lengths.
    pub session_len: (usize, usize),
    pub posts: PostsConfig,
    pub seed: u64,
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        let attributes = vec![
            ("brand".to_string(), names(&[
                "Shoetopia", "Roadster", "Nautica", "Levis", "Puma", "Mango", "Biba", "Wrogn",
                "Sassafras", "Kook", "Anouk", "Highlander",
            ])),
            ("gender".to_string(), names(&["Women", "Men"])),
            ("color".to_string(), names(&[
                "Beige", "Red", "Blue", "Black", "White", "Green", "Yellow", "Maroon", "Navy",
                "Pink",
            ])),
            ("pattern".to_string(), names(&["Solid", "Striped", "Checked", "Printed", "Floral", "Embroidered"])),
            ("style".to_string(), names(&[
                "PeepToe", "Casual", "Formal", "Slim", "Relaxed", "Boho", "Ethnic", "Sporty",
            ])),
            ("type".to_string(), names(&[
                "Heel", "Shirt", "Tshirt", "Jeans", "Dress", "Kurta", "Sneaker", "Jacket",
            ])),
            ("category".to_string(), names(&["Footwear", "Topwear", "Bottomwear", "Dresses", "Outerwear"])),
        ];
        SynthConfig {
            n_products: 600,
            n_sessions: 1000,
            attributes,
            n_archetypes: 2,
            focus: 0.15,
            concentration: 0.97,
            archetypes: Vec::new(),
            session_len: (2, 30),
            posts: PostsConfig::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_products == 0 || self.n_sessions == 0 {
            return bad("n_products and n_sessions must be positive");
        }
        if self.attributes.iter().any(|(_, v)| v.is_empty()) || self.attributes.is_empty() {
            return bad("every attribute needs at least one value");
        }
        for req in ["category", "gender"] {
            if !self.attributes.iter().any(|(k, _)| k == req) {
                return Err(Error::InvalidConfig(format!("attributes must include {req:?}")));
            }
        }
        if self.archetypes.is_empty() && self.n_archetypes == 0 {
            return bad("n_archetypes must be positive");
        }
        for a in &self.archetypes {
            if a.prefs.len() != self.attributes.len() {
                return bad("archetype must give one distribution per attribute");
            }
            for (row, (_, vals)) in a.prefs.iter().zip(&self.attributes) {
                let s: f64 = row.iter().sum();
                if row.len() != vals.len() || (s - 1.0).abs() > 1e-9 || row.iter().any(|&w| w < 0.0) {
                    return bad("archetype distributions must be non-negative and sum to 1");
                }
            }
        }
        let (lo, hi) = self.session_len;
        if lo == 0 || lo > hi {
            return bad("session_len must be a non-empty positive range");
        }
        if !(self.concentration > 0.0 && self.concentration <= 1.0) || !(self.focus > 0.0 && self.focus <= 1.0) {
            return bad("focus and concentration must be in (0, 1]");
        }
        let p = &self.posts;
        if p.n_posts > 0 && (p.tags_per_post.0 == 0 || p.tags_per_post.0 > p.tags_per_post.1) {
            return bad("tags_per_post must be a non-empty positive range");
        }
        for (lo, hi) in [p.history_len, p.test_engaged, p.test_viewed] {
            if lo > hi {
                return bad("posts ranges must satisfy lo <= hi");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub id: String,
    pub product_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserHistory {
    pub user_id: String,
    /// Engaged posts with engagement timestamps.
    pub engaged: Vec<(String, i64)>,
    pub viewed: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub catalog: Catalog,
    pub sessions: Vec<Session>,
    pub posts: Vec<Post>,
    pub histories: Vec<UserHistory>,
    /// Archetype index of each session.
    pub session_archetypes: Vec<usize>,
}

fn draw_archetype(cfg: &SynthConfig, rng: &mut Rng) -> Archetype {
    let prefs = cfg
        .attributes
        .iter()
        .map(|(_, vals)| {
            let n = vals.len();
            let k = ((cfg.focus * n as f64) as usize).clamp(1, n);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            let mut row = vec![0.0; n];
            let rest = n - k;
            for (rank, &v) in idx.iter().enumerate() {
                row[v] = if rank < k {
                    if rest == 0 { 1.0 / k as f64 } else { cfg.concentration / k as f64 }
                } else {
                    (1.0 - cfg.concentration) / rest as f64
                };
            }
            row
        })
        .collect();
    Archetype { prefs }
}

/// Cumulative sampling weights of catalog products under an archetype.
fn product_cdf(arch: &Archetype, codes: &[Vec<usize>]) -> Vec<f64> {
    let mut acc = 0.0;
    codes
        .iter()
        .map(|c| {
            let w: f64 = c.iter().enumerate().map(|(a, &v)| arch.prefs[a][v]).product();
            acc += w;
            acc
        })
        .collect()
}

fn sample_cdf(cdf: &[f64], rng: &mut Rng) -> usize {
    let total = *cdf.last().unwrap_or(&0.0);
    let u = rng.random::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Generates a catalog, sessions, posts and user histories as a pure
/// function of `cfg`.
///
/// Products draw every attribute uniformly. Each session (and post, and
/// user) belongs to one archetype and samples products with weight equal to
/// the product of the archetype's preferences for the product's attribute
/// values, so co-occurring products share attribute values.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);

    let mut codes = Vec::with_capacity(cfg.n_products);
    let mut products = Vec::with_capacity(cfg.n_products);
    for i in 0..cfg.n_products {
        let code: Vec<usize> = cfg
            .attributes
            .iter()
            .map(|(_, vals)| rng.random_range(0..vals.len()))
            .collect();
        let attrs = cfg
            .attributes
            .iter()
            .zip(&code)
            .map(|((k, vals), &v)| (k.clone(), vals[v].clone()))
            .collect();
        products.push(Product::new(format!("P{i:05}"), attrs)?);
        codes.push(code);
    }

    let archetypes: Vec<Archetype> = if cfg.archetypes.is_empty() {
        (0..cfg.n_archetypes).map(|_| draw_archetype(cfg, &mut rng)).collect()
    } else {
        cfg.archetypes.clone()
    };
    let cdfs: Vec<Vec<f64>> = archetypes.iter().map(|a| product_cdf(a, &codes)).collect();
    if cdfs.iter().any(|c| *c.last().unwrap_or(&0.0) <= 0.0) {
        return Err(Error::InvalidConfig(
            "an archetype gives zero weight to every catalog product".to_string(),
        ));
    }

    let mut sessions = Vec::with_capacity(cfg.n_sessions);
    let mut session_archetypes = Vec::with_capacity(cfg.n_sessions);
    let mut clock: i64 = 1_600_000_000;
    for s in 0..cfg.n_sessions {
        let a = rng.random_range(0..archetypes.len());
        let len = rng.random_range(cfg.session_len.0..=cfg.session_len.1);
        clock += rng.random_range(60..3600);
        let mut t = clock;
        let events = (0..len)
            .map(|_| {
                t += rng.random_range(5..300);
                let roll: f64 = rng.random();
                let kind = if roll < 0.8 {
                    EventKind::Browse
                } else if roll < 0.95 {
                    EventKind::AddToCart
                } else {
                    EventKind::Purchase
                };
                Event {
                    product_id: products[sample_cdf(&cdfs[a], &mut rng)].id.clone(),
                    timestamp: t,
                    kind,
                }
            })
            .collect();
        sessions.push(Session { user_id: format!("U{s:06}"), events });
        session_archetypes.push(a);
    }

    let pc = &cfg.posts;
    let mut posts = Vec::with_capacity(pc.n_posts);
    let mut post_arch = Vec::with_capacity(pc.n_posts);
    for i in 0..pc.n_posts {
        let a = rng.random_range(0..archetypes.len());
        let n = rng.random_range(pc.tags_per_post.0..=pc.tags_per_post.1);
        let product_ids = (0..n)
            .map(|_| products[sample_cdf(&cdfs[a], &mut rng)].id.clone())
            .collect();
        posts.push(Post { id: format!("Q{i:05}"), product_ids });
        post_arch.push(a);
    }

    let mut histories = Vec::new();
    if !posts.is_empty() {
        let by_arch: Vec<Vec<usize>> = (0..archetypes.len())
            .map(|a| (0..posts.len()).filter(|&p| post_arch[p] == a).collect())
            .collect();
        const YEAR: i64 = 365 * 24 * 3600;
        for u in 0..pc.n_users {
            let a = rng.random_range(0..archetypes.len());
            let pick = |rng: &mut Rng| -> usize {
                if !by_arch[a].is_empty() && rng.random::<f64>() < pc.affinity {
                    by_arch[a][rng.random_range(0..by_arch[a].len())]
                } else {
                    rng.random_range(0..posts.len())
                }
            };
            let mut engaged: Vec<(String, i64)> = Vec::new();
            let mut seen = BTreeMap::new();
            let n_hist = rng.random_range(pc.history_len.0..=pc.history_len.1);
            for _ in 0..n_hist {
                let p = pick(&mut rng);
                let ts = pc.test_start - rng.random_range(1..YEAR);
                if seen.insert(p, ()).is_none() {
                    engaged.push((posts[p].id.clone(), ts));
                }
            }
            let n_test = rng.random_range(pc.test_engaged.0..=pc.test_engaged.1);
            for _ in 0..n_test {
                let p = pick(&mut rng);
                let ts = pc.test_start + rng.random_range(0..30 * 24 * 3600);
                if seen.insert(p, ()).is_none() {
                    engaged.push((posts[p].id.clone(), ts));
                }
            }
            let n_view = rng.random_range(pc.test_viewed.0..=pc.test_viewed.1);
            let mut viewed = Vec::new();
            for _ in 0..n_view {
                let p = rng.random_range(0..posts.len());
                if seen.insert(p, ()).is_none() {
                    viewed.push(posts[p].id.clone());
                }
            }
            histories.push(UserHistory { user_id: format!("V{u:05}"), engaged, viewed });
        }
    }

    Ok(SynthData {
        catalog: Catalog::new(products)?,
        sessions,
        posts,
        histories,
        session_archetypes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    fn shoe() -> Product {
        Product::new(
            "p1",
            attrs(&[
                ("category", "Footwear"),
                ("color", "Beige"),
                ("brand", "Shoetopia"),
                ("type", "Heel"),
                ("gender", "Women"),
                ("style", "PeepToe"),
                ("pattern", "Solid"),
            ]),
        )
        .unwrap()
    }

    fn session(ids: &[&str]) -> Session {
        Session {
            user_id: "u".into(),
            events: ids
                .iter()
                .enumerate()
                .map(|(i, id)| Event {
                    product_id: id.to_string(),
                    timestamp: i as i64,
                    kind: EventKind::Browse,
                })
                .collect(),
        }
    }

    fn small_catalog(n: usize) -> Catalog {
        Catalog::new(
            (0..n)
                .map(|i| {
                    Product::new(
                        format!("p{i}"),
                        attrs(&[("brand", &format!("B{i}")), ("gender", "Men"), ("category", "Topwear")]),
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn sentence_uses_catalog_order() {
        assert_eq!(
            product_sentence(&shoe()),
            "Shoetopia Women Beige Solid PeepToe Heel Footwear"
        );
    }

    #[test]
    fn single_attribute_sentence() {
        let p = Product::unchecked("x", attrs(&[("brand", "X")]));
        assert_eq!(product_sentence(&p), "X");
    }

    #[test]
    fn extras_follow_known_attributes() {
        let p = Product::unchecked("x", attrs(&[("fabric", "Cotton"), ("brand", "X"), ("fit", "Loose")]));
        assert_eq!(product_sentence(&p), "X Cotton Loose");
    }

    #[test]
    fn missing_required_attribute_rejected() {
        assert!(Product::new("x", attrs(&[("brand", "X"), ("gender", "Men")])).is_err());
    }

    #[test]
    fn paragraph_lengths() {
        let cat = small_catalog(30);
        let ids: Vec<String> = (0..30).map(|i| format!("p{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();

        let p3 = session_paragraph(&session(&refs[..3]), &cat).unwrap().unwrap();
        assert_eq!(p3.spans.len(), 3);
        assert_eq!(p3.text.matches(SENTENCE_SEPARATOR).count(), 2);
        assert_eq!(&p3.text[p3.spans[1].clone()], "B1 Men Topwear");

        let p25 = session_paragraph(&session(&refs[..25]), &cat).unwrap().unwrap();
        assert_eq!(p25.spans.len(), 20);
        assert_eq!(p25.product_ids.last().unwrap(), "p19");

        assert!(session_paragraph(&session(&refs[..2]), &cat).unwrap().is_none());
    }

    #[test]
    fn unknown_product_is_error() {
        let cat = small_catalog(3);
        assert!(matches!(
            session_paragraph(&session(&["p0", "p1", "nope"]), &cat),
            Err(Error::UnknownProduct(_))
        ));
    }

    #[test]
    fn paragraph_sorts_by_timestamp() {
        let cat = small_catalog(3);
        let mut s = session(&["p0", "p1", "p2"]);
        s.events[0].timestamp = 10;
        let p = session_paragraph(&s, &cat).unwrap().unwrap();
        assert_eq!(p.product_ids, ["p1", "p2", "p0"]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let sessions: Vec<Session> = (0..10)
            .map(|i| Session { user_id: format!("u{i}"), events: vec![] })
            .collect();
        let (a, b) = split(&sessions, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        let (a2, b2) = split(&sessions, 0.8, 3).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        let mut all: Vec<String> = a.iter().chain(&b).map(|s| s.user_id.clone()).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
        assert!(split(&sessions, 1.0, 3).is_err());
        // 1.5M sessions at 2/3 gives the 1M / 0.5M split
        assert_eq!(math::round(2.0 / 3.0 * 1_500_000.0) as usize, 1_000_000);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let cfg = SynthConfig { n_sessions: 50, n_products: 80, ..Default::default() };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.sessions, b.sessions);
        assert_eq!(a.catalog.products(), b.catalog.products());
        assert_eq!(a.histories, b.histories);
    }

    #[test]
    fn point_mass_archetype() {
        let mut cfg = SynthConfig { n_sessions: 40, n_products: 200, ..Default::default() };
        let prefs = cfg
            .attributes
            .iter()
            .map(|(k, vals)| {
                let n = vals.len();
                if k == "color" {
                    vals.iter().map(|v| if v == "Red" { 1.0 } else { 0.0 }).collect()
                } else {
                    vec![1.0 / n as f64; n]
                }
            })
            .collect();
        cfg.archetypes = vec![Archetype { prefs }];
        let data = generate_synthetic(&cfg).unwrap();
        for s in &data.sessions {
            for e in &s.events {
                assert_eq!(data.catalog.get(&e.product_id).unwrap().attribute("color"), Some("Red"));
            }
        }
    }

    #[test]
    fn session_lengths_cover_filter_paths() {
        let data = generate_synthetic(&SynthConfig { n_sessions: 400, ..Default::default() }).unwrap();
        let lens: Vec<usize> = data.sessions.iter().map(|s| s.events.len()).collect();
        assert!(lens.iter().any(|&l| l < MIN_SESSION_PRODUCTS));
        assert!(lens.iter().any(|&l| l > MAX_SESSION_PRODUCTS));
        assert!(lens.iter().all(|&l| (2..=30).contains(&l)));
    }

    #[test]
    fn rejects_bad_archetype() {
        let mut cfg = SynthConfig::default();
        cfg.archetypes = vec![Archetype { prefs: vec![vec![0.5]; 7] }];
        assert!(generate_synthetic(&cfg).is_err());
    }
}
