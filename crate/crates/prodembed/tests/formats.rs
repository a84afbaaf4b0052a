//! File round trips through a temporary directory.

use std::path::Path;

use prodembed::formats::checkpoint::{manifest_path, read_checkpoint, write_checkpoint, Checkpoint};
use prodembed::formats::corpus::{
    read_catalog, read_histories, read_posts, read_sessions, write_catalog, write_histories, write_posts,
    write_sessions,
};
use prodembed::formats::store::{read_store, write_store};
use prodembed::formats::vectors::{read_vectors, write_vectors};
use prodembed::formats::vocab::{read_vocab, write_vocab};
use prodembed::Error;
use prodembed_core::corpus::{generate_synthetic, paragraphs, SynthConfig};
use prodembed_core::embed::{EmbeddingStore, SourceTag};
use prodembed_core::model::{init_weights, ModelConfig};
use prodembed_core::tokenizer::train_bpe;
use prodembed_core::word2vec::{train_skipgram, W2VConfig};

fn data() -> prodembed_core::corpus::SynthData {
    generate_synthetic(&SynthConfig { n_products: 80, n_sessions: 30, seed: 3, ..Default::default() }).unwrap()
}

#[test]
fn corpus_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = data();
    let p = |name: &str| dir.path().join(name);
    write_catalog(&p("c.tsv"), &d.catalog).unwrap();
    write_sessions(&p("s.tsv"), &d.sessions).unwrap();
    write_posts(&p("p.tsv"), &d.posts).unwrap();
    write_histories(&p("h.tsv"), &d.histories).unwrap();
    assert_eq!(read_catalog(&p("c.tsv")).unwrap().products(), d.catalog.products());
    assert_eq!(read_sessions(&p("s.tsv")).unwrap(), d.sessions);
    assert_eq!(read_posts(&p("p.tsv")).unwrap(), d.posts);
    assert_eq!(read_histories(&p("h.tsv")).unwrap(), d.histories);
}

#[test]
fn model_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = data();
    let texts: Vec<String> = paragraphs(&d.sessions, &d.catalog).unwrap().into_iter().map(|p| p.text).collect();

    let vocab = train_bpe(&texts, 300).unwrap();
    let vp = dir.path().join("nested/vocab.json");
    write_vocab(&vp, &vocab).unwrap();
    assert_eq!(read_vocab(&vp).unwrap(), vocab);

    let config = ModelConfig {
        n_layers: 1,
        n_heads: 2,
        d_model: 8,
        d_ff: 16,
        max_len: 16,
        vocab_size: vocab.len(),
        embed_factor: Some(4),
        dropout: 0.0,
        seed: 5,
    };
    let c = Checkpoint { weights: init_weights(&config).unwrap(), config, tag: SourceTag::MlmAlbertLike };
    let cp = dir.path().join("m.ckpt");
    write_checkpoint(&cp, &c).unwrap();
    let back = read_checkpoint(&cp).unwrap();
    assert_eq!((back.config, back.tag), (c.config, c.tag));
    assert_eq!(back.weights, c.weights);
    assert!(std::fs::read_to_string(manifest_path(&cp)).unwrap().contains("embed_proj"));

    let w2v = W2VConfig { dim: 6, min_count: 1, epochs: 1, table_size: 1000, ..Default::default() };
    let vectors = train_skipgram(&texts, &w2v).unwrap().vectors();
    let wp = dir.path().join("v.txt");
    write_vectors(&wp, &vectors).unwrap();
    assert_eq!(read_vectors(&wp).unwrap(), vectors);

    let mut store = EmbeddingStore::new(3, SourceTag::Word2Vec).unwrap();
    store.insert("P1", &[0.1, -2.0, 1e-8]).unwrap();
    store.insert("id:with:colons", &[0.0, 0.0, 1.0]).unwrap();
    let sp = dir.path().join("e.store");
    write_store(&sp, &store).unwrap();
    assert_eq!(read_store(&sp).unwrap(), store);
}

#[test]
fn errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.tsv");
    let err = read_sessions(&missing).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("absent.tsv"), "{err}");

    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "U1\tP1:12:browse\nU2\tP2:oops:browse\n").unwrap();
    let err = read_sessions(&bad).unwrap_err().to_string();
    assert!(err.contains("bad.tsv:2"), "{err}");

    let store = dir.path().join("trunc.store");
    std::fs::write(&store, b"PEMBSTOR").unwrap();
    assert!(read_store(&store).unwrap_err().to_string().contains("trunc.store"));
    assert!(read_checkpoint(Path::new(&store)).is_err());
}
