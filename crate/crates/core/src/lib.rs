//! Algorithmic core for learning contextual product embeddings from
//! session text.
//!
//! Everything here is `no_std` + `alloc`: dense tensors with a reverse-mode
//! tape, an encoder transformer, MLM/PLM pre-training with AdamW, a BPE
//! tokenizer, a skip-gram Word2Vec baseline, embedding composition, and the
//! two downstream evaluation harnesses (next-product MRR and posts-ranking
//! NDCG). File formats, the CLI and threading live in the `prodembed` crate.
#![no_std]

extern crate alloc;

pub mod corpus;
pub mod embed;
mod error;
pub mod evalnpr;
pub mod evalrank;
pub mod math;
pub mod model;
pub mod pretrain;
pub mod rng;
pub mod tensor;
pub mod tokenizer;
pub mod word2vec;

pub use error::{Error, Result};
