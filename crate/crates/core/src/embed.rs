//! Product, session, post and user vectors, cosine similarity, and an
//! in-memory embedding store.
//!
//! Every composed vector is an arithmetic mean computed in `f64`; the store
//! keeps rows at `f32`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{product_sentence, Catalog, Product};
use crate::math;
use crate::model::{self, AttentionMask, ModelConfig, TransformerWeights};
use crate::pretrain::Executor;
use crate::tensor::kernels::dot;
use crate::tokenizer::{BpeVocab, PAD_ID};
use crate::word2vec::WordVectors;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SourceTag {
    MlmBertLike,
    MlmRobertaLike,
    MlmAlbertLike,
    PlmXlnetLike,
    Word2Vec,
}

impl SourceTag {
    pub const ALL: [SourceTag; 5] = [
        SourceTag::MlmBertLike,
        SourceTag::MlmRobertaLike,
        SourceTag::MlmAlbertLike,
        SourceTag::PlmXlnetLike,
        SourceTag::Word2Vec,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::MlmBertLike => "mlm-bert-like",
            SourceTag::MlmRobertaLike => "mlm-roberta-like",
            SourceTag::MlmAlbertLike => "mlm-albert-like",
            SourceTag::PlmXlnetLike => "plm-xlnet-like",
            SourceTag::Word2Vec => "word2vec",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

/// Mean of the last hidden states over the non-PAD tokens of the product
/// sentence, read with a bidirectional mask.
pub fn product_embedding(
    w: &TransformerWeights,
    cfg: &ModelConfig,
    vocab: &BpeVocab,
    product: &Product,
) -> Result<Vec<f64>> {
    let ids = vocab.encode(&product_sentence(product));
    if ids.is_empty() {
        return Err(Error::EmptyInput("product sentence tokenizes to nothing"));
    }
    let out = model::run(w, cfg, &ids, &AttentionMask::bidirectional(ids.len()))?;
    let rows: Vec<&[f64]> = ids
        .iter()
        .enumerate()
        .filter(|&(_, &id)| id != PAD_ID)
        .map(|(i, _)| out.hidden.row(i))
        .collect();
    mean_vectors(&rows)
}

/// Mean of the in-vocabulary word vectors of the product sentence.
pub fn product_embedding_w2v(vectors: &WordVectors, product: &Product) -> Result<Vec<f64>> {
    let sentence = product_sentence(product);
    let rows: Vec<&[f64]> = sentence.split_whitespace().filter_map(|w| vectors.get(w)).collect();
    if rows.is_empty() {
        return Err(Error::MissingEmbedding(format!(
            "every word of product {} is out of vocabulary",
            product.id
        )));
    }
    mean_vectors(&rows)
}

/// Element-wise arithmetic mean.
pub fn mean_vectors<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Vec<f64>> {
    let first = vectors.first().ok_or(Error::EmptyInput("vectors to average"))?;
    let d = first.as_ref().len();
    let mut acc = vec![0.0; d];
    for v in vectors {
        let v = v.as_ref();
        if v.len() != d {
            return Err(Error::Shape { op: "mean_vectors", left: vec![d], right: vec![v.len()] });
        }
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vectors.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// Mean of the first `n−1` product vectors of a session.
pub fn session_vector<V: AsRef<[f64]>>(product_vectors: &[V]) -> Result<Vec<f64>> {
    mean_vectors(product_vectors)
}

/// Mean of the vectors of the products tagged in a post.
pub fn post_embedding<V: AsRef<[f64]>>(tagged: &[V]) -> Result<Vec<f64>> {
    mean_vectors(tagged)
}

/// Mean of the user's top medoid post vectors.
pub fn user_embedding<V: AsRef<[f64]>>(medoid_posts: &[V]) -> Result<Vec<f64>> {
    mean_vectors(medoid_posts)
}

/// `u·v / (‖u‖‖v‖)`; 0 when either vector is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let (uu, vv) = (dot(u, u), dot(v, v));
    if uu == 0.0 || vv == 0.0 {
        log::warn!("cosine with a zero vector, scoring 0");
        return 0.0;
    }
    (dot(u, v) / (math::sqrt(uu) * math::sqrt(vv))).clamp(-1.0, 1.0)
}

/// Anything that can hand out a vector for an id.
pub trait VectorLookup {
    fn vector(&self, id: &str) -> Option<Vec<f64>>;
}

impl VectorLookup for BTreeMap<String, Vec<f64>> {
    fn vector(&self, id: &str) -> Option<Vec<f64>> {
        self.get(id).cloned()
    }
}

/// Fixed-width `f32` rows keyed by product id, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    tag: SourceTag,
    ids: Vec<String>,
    rows: Vec<f32>,
    index: BTreeMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, tag: SourceTag) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dim must be positive".to_string()));
        }
        Ok(EmbeddingStore { dim, tag, ids: Vec::new(), rows: Vec::new(), index: BTreeMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> SourceTag {
        self.tag
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Rounds `v` to `f32` and appends it.
    pub fn insert(&mut self, id: &str, v: &[f64]) -> Result<()> {
        let row: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        self.insert_f32(id, &row)
    }

    pub fn insert_f32(&mut self, id: &str, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::Shape { op: "store insert", left: vec![self.dim], right: vec![v.len()] });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { param: format!("embedding of {id}") });
        }
        if self.index.contains_key(id) {
            return Err(Error::Mismatch(format!("duplicate embedding id {id}")));
        }
        self.index.insert(id.to_string(), self.ids.len());
        self.ids.push(id.to_string());
        self.rows.extend_from_slice(v);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        let i = *self.index.get(id)?;
        Some(&self.rows[i * self.dim..(i + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(self.rows.chunks_exact(self.dim))
            .map(|(id, r)| (id.as_str(), r))
    }
}

impl VectorLookup for EmbeddingStore {
    fn vector(&self, id: &str) -> Option<Vec<f64>> {
        self.get(id).map(|r| r.iter().map(|&x| x as f64).collect())
    }
}

/// Vectors for every product id in the store, or the first missing id.
pub fn lookup_all<L: VectorLookup + ?Sized>(store: &L, ids: &[String]) -> Result<Vec<Vec<f64>>> {
    ids.iter()
        .map(|id| store.vector(id).ok_or_else(|| Error::MissingEmbedding(id.clone())))
        .collect()
}

/// Embeds every catalog product with a transformer checkpoint.
pub fn embed_catalog<E: Executor>(
    w: &TransformerWeights,
    cfg: &ModelConfig,
    vocab: &BpeVocab,
    catalog: &Catalog,
    tag: SourceTag,
    exec: &E,
) -> Result<EmbeddingStore> {
    let products = catalog.products();
    let vecs = exec.map(products.len(), |i| product_embedding(w, cfg, vocab, &products[i]))?;
    let mut store = EmbeddingStore::new(cfg.d_model, tag)?;
    for (p, v) in products.iter().zip(&vecs) {
        store.insert(&p.id, v)?;
    }
    Ok(store)
}

/// Embeds every catalog product with word vectors. Products whose words
/// are all out of vocabulary are left out and returned by id.
pub fn embed_catalog_w2v(vectors: &WordVectors, catalog: &Catalog) -> Result<(EmbeddingStore, Vec<String>)> {
    let mut store = EmbeddingStore::new(vectors.dim(), SourceTag::Word2Vec)?;
    let mut missing = Vec::new();
    for p in catalog.products() {
        match product_embedding_w2v(vectors, p) {
            Ok(v) => store.insert(&p.id, &v)?,
            Err(Error::MissingEmbedding(_)) => missing.push(p.id.clone()),
            Err(e) => return Err(e),
        }
    }
    Ok((store, missing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_weights;
    use crate::pretrain::Sequential;
    use crate::tokenizer::train_bpe;
    use proptest::prelude::*;

    fn prod(id: &str, vals: &[(&str, &str)]) -> Product {
        Product::new(id, vals.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()).unwrap()
    }

    #[test]
    fn tags_round_trip() {
        for t in SourceTag::ALL {
            assert_eq!(SourceTag::parse(t.as_str()), Some(t));
        }
        assert_eq!(SourceTag::parse("bert"), None);
    }

    #[test]
    fn mean_cases() {
        let v = vec![1.0, -2.0, 3.5];
        assert_eq!(session_vector(&[v.clone()]).unwrap(), v);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert_eq!(post_embedding(&[v.clone(), neg]).unwrap(), vec![0.0; 3]);
        assert_eq!(user_embedding(&[v.clone(), v.clone(), v.clone(), v.clone()]).unwrap(), v);
        assert!(mean_vectors::<Vec<f64>>(&[]).is_err());
        assert!(mean_vectors(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn cosine_cases() {
        let v = [0.3, -1.2, 2.0];
        assert!((cosine(&v, &v) - 1.0).abs() < 1e-12);
        assert!((cosine(&v, &[-0.3, 1.2, -2.0]) + 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 5.0]), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn store_rules() {
        let mut s = EmbeddingStore::new(2, SourceTag::Word2Vec).unwrap();
        s.insert("a", &[1.0, 2.0]).unwrap();
        assert!(s.insert("a", &[1.0, 2.0]).is_err());
        assert!(s.insert("b", &[1.0]).is_err());
        assert!(s.insert("b", &[f64::NAN, 0.0]).is_err());
        assert_eq!(s.vector("a"), Some(vec![1.0, 2.0]));
        assert_eq!(s.len(), 1);
        assert!(lookup_all(&s, &["a".to_string(), "z".to_string()]).is_err());
    }

    #[test]
    fn transformer_product_embedding() {
        let p = prod("P1", &[("category", "Footwear"), ("gender", "Women"), ("color", "Beige")]);
        let vocab = train_bpe(&[product_sentence(&p)], 60).unwrap();
        let cfg = ModelConfig {
            n_layers: 1,
            n_heads: 2,
            d_model: 8,
            d_ff: 16,
            max_len: 32,
            vocab_size: vocab.len(),
            embed_factor: None,
            dropout: 0.0,
            seed: 3,
        };
        let w = init_weights(&cfg).unwrap();
        let e = product_embedding(&w, &cfg, &vocab, &p).unwrap();
        assert_eq!(e.len(), 8);
        assert_eq!(e, product_embedding(&w, &cfg, &vocab, &p).unwrap());

        let ids = vocab.encode(&product_sentence(&p));
        let out = model::run(&w, &cfg, &ids, &AttentionMask::bidirectional(ids.len())).unwrap();
        let rows: Vec<&[f64]> = (0..ids.len()).map(|i| out.hidden.row(i)).collect();
        assert_eq!(e, mean_vectors(&rows).unwrap());

        let catalog = Catalog::new(vec![p]).unwrap();
        let store = embed_catalog(&w, &cfg, &vocab, &catalog, SourceTag::MlmBertLike, &Sequential).unwrap();
        let stored = store.vector("P1").unwrap();
        assert!(stored.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-6));
    }

    #[test]
    fn single_token_product_is_that_state() {
        let p = prod("P1", &[("category", "x"), ("gender", "y")]);
        let vocab = train_bpe(&["x y"], 10).unwrap();
        let cfg = ModelConfig {
            n_layers: 1,
            n_heads: 1,
            d_model: 4,
            d_ff: 8,
            max_len: 8,
            vocab_size: vocab.len(),
            embed_factor: None,
            dropout: 0.0,
            seed: 0,
        };
        let w = init_weights(&cfg).unwrap();
        // "y x" -> two single-character words, one token each
        let e = product_embedding(&w, &cfg, &vocab, &p).unwrap();
        let ids = vocab.encode("y x");
        assert_eq!(ids.len(), 2);
        let out = model::run(&w, &cfg, &ids, &AttentionMask::bidirectional(2)).unwrap();
        let mean: Vec<f64> = (0..4).map(|k| (out.hidden.at(0, k) + out.hidden.at(1, k)) / 2.0).collect();
        assert_eq!(e, mean);
        let one = model::run(&w, &cfg, &ids[..1], &AttentionMask::bidirectional(1)).unwrap();
        assert_eq!(mean_vectors(&[one.hidden.row(0)]).unwrap(), one.hidden.row(0));
    }

    #[test]
    fn w2v_product_embedding() {
        let wv = WordVectors::new(
            2,
            vec![("Women".to_string(), vec![1.0, 0.0]), ("Footwear".to_string(), vec![0.0, 3.0])],
        )
        .unwrap();
        let p = prod("P1", &[("category", "Footwear"), ("gender", "Women"), ("color", "Teal")]);
        // Teal is out of vocabulary and skipped
        assert_eq!(product_embedding_w2v(&wv, &p).unwrap(), vec![0.5, 1.5]);
        let q = prod("P2", &[("category", "Women"), ("gender", "Women")]);
        assert_eq!(product_embedding_w2v(&wv, &q).unwrap(), vec![1.0, 0.0]);
        let r = prod("P3", &[("category", "Bags"), ("gender", "Men")]);
        assert!(matches!(product_embedding_w2v(&wv, &r), Err(Error::MissingEmbedding(_))));
        let (store, missing) = embed_catalog_w2v(&wv, &Catalog::new(vec![p, q, r]).unwrap()).unwrap();
        assert_eq!(store.ids(), &["P1", "P2"]);
        assert_eq!(missing, ["P3"]);
    }

    proptest! {
        #[test]
        fn mean_is_scale_equivariant(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..8), a in -5.0f64..5.0) {
            let m = mean_vectors(&rows).unwrap();
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|x| a * x).collect()).collect();
            let ms = mean_vectors(&scaled).unwrap();
            for (x, y) in m.iter().zip(&ms) {
                prop_assert!((a * x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn mean_is_permutation_invariant(rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 3), 1..8), rot in 0usize..8) {
            let m = mean_vectors(&rows).unwrap();
            let mut p = rows.clone();
            p.rotate_left(rot % rows.len());
            p.reverse();
            for (x, y) in m.iter().zip(&mean_vectors(&p).unwrap()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(u in prop::collection::vec(-5.0f64..5.0, 3), v in prop::collection::vec(-5.0f64..5.0, 3), a in 0.1f64..10.0, b in 0.1f64..10.0) {
            prop_assume!(dot(&u, &u) > 1e-6 && dot(&v, &v) > 1e-6);
            let c = cosine(&u, &v);
            prop_assert!((c - cosine(&v, &u)).abs() < 1e-12);
            let us: Vec<f64> = u.iter().map(|x| a * x).collect();
            let vs: Vec<f64> = v.iter().map(|x| b * x).collect();
            prop_assert!((c - cosine(&us, &vs)).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&c));
        }
    }
}
