//! One function per CLI command. Each reads its inputs, writes its outputs
//! and a `<primary output>.run.conf` manifest, and returns the written
//! paths. Inputs are never modified.

use std::path::{Path, PathBuf};
use std::time::Instant;

use prodembed_core::corpus::{self, generate_synthetic, product_sentence, Catalog, PostsConfig, Session, SynthConfig};
use prodembed_core::embed::{embed_catalog, embed_catalog_w2v, EmbeddingStore, SourceTag};
use prodembed_core::evalnpr::{evaluate_npr, NprConfig};
use prodembed_core::evalrank::{evaluate_rank, post_vectors, RankConfig};
use prodembed_core::model::{export_attention, init_weights, ModelConfig};
use prodembed_core::pretrain::{self, AdamWConfig, ObjectiveConfig, TrainConfig};
use prodembed_core::rng::derive_seed;
use prodembed_core::tokenizer::{train_bpe, BpeVocab};
use prodembed_core::word2vec::{train_skipgram, W2VConfig};

use crate::config::RunConfig;
use crate::exec::Threads;
use crate::formats::checkpoint::{manifest_path, read_checkpoint, write_checkpoint, Checkpoint};
use crate::formats::corpus::{
    read_catalog, read_histories, read_posts, read_sessions, write_catalog, write_histories, write_posts,
    write_sessions,
};
use crate::formats::reports::{
    render_attention_csv, render_mrr_report, render_ndcg_report, render_perplexity_report, render_train_report,
};
use crate::formats::store::{read_store, write_store};
use crate::formats::vectors::{read_vectors, write_vectors};
use crate::formats::vocab::{read_vocab, write_vocab};
use crate::formats::write_bytes;
use crate::{Error, Result};

// Sub-streams of the master seed.
const SPLIT_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const TRAIN_STREAM: u64 = 3;
const W2V_STREAM: u64 = 4;
const NPR_STREAM: u64 = 5;

pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    match cfg.command() {
        "synth" => synth(cfg),
        "tokenizer" => tokenizer(cfg),
        "pretrain" => pretrain(cfg),
        "w2v" => w2v(cfg),
        "embed" => embed(cfg),
        "eval-npr" => eval_npr(cfg),
        "eval-rank" => eval_rank(cfg),
        "perplexity" => perplexity(cfg),
        "export-attention" => attention(cfg),
        "pipeline" => pipeline(cfg),
        other => Err(Error::config("command", format!("unknown command {other:?}"))),
    }
}

fn threads(cfg: &RunConfig) -> Result<Threads> {
    Threads::new(cfg.usize("threads"))
}

/// Wraps a core validation error so the diagnostic names `key`.
fn keyed<T>(key: &str, r: prodembed_core::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        prodembed_core::Error::InvalidConfig(msg) => Error::config(key, msg),
        other => Error::Core(other),
    })
}

fn finish(cfg: &RunConfig, mut written: Vec<PathBuf>) -> Result<Vec<PathBuf>> {
    let manifest = cfg.write_beside(&written[0])?;
    written.push(manifest);
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    Ok(written)
}

pub fn synth_config(cfg: &RunConfig) -> SynthConfig {
    SynthConfig {
        n_products: cfg.usize("n_products"),
        n_sessions: cfg.usize("n_sessions"),
        n_archetypes: cfg.usize("n_archetypes"),
        focus: cfg.f64("focus"),
        concentration: cfg.f64("concentration"),
        session_len: (cfg.usize("session_len_min"), cfg.usize("session_len_max")),
        posts: PostsConfig {
            n_posts: cfg.usize("n_posts"),
            n_users: cfg.usize("n_users"),
            affinity: cfg.f64("affinity"),
            test_start: cfg.i64("test_start"),
            ..PostsConfig::default()
        },
        seed: cfg.u64("seed"),
        ..SynthConfig::default()
    }
}

pub fn synth(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = keyed("synth", generate_synthetic(&synth_config(cfg)))?;
    let (train, test) = keyed(
        "train_fraction",
        corpus::split(&data.sessions, cfg.f64("train_fraction"), derive_seed(cfg.u64("seed"), SPLIT_STREAM)),
    )?;
    let out: Vec<PathBuf> = ["catalog", "sessions_train", "sessions_test", "posts", "histories"]
        .iter()
        .map(|k| cfg.path(k))
        .collect();
    write_catalog(&out[0], &data.catalog)?;
    write_sessions(&out[1], &train)?;
    write_sessions(&out[2], &test)?;
    write_posts(&out[3], &data.posts)?;
    write_histories(&out[4], &data.histories)?;
    log::info!(
        "synth: {} products, {} train / {} test sessions, {} posts, {} users",
        data.catalog.len(),
        train.len(),
        test.len(),
        data.posts.len(),
        data.histories.len()
    );
    finish(cfg, out)
}

fn paragraph_texts(sessions: &[Session], catalog: &Catalog) -> Result<Vec<String>> {
    Ok(corpus::paragraphs(sessions, catalog)?.into_iter().map(|p| p.text).collect())
}

pub fn tokenizer(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let catalog = read_catalog(&cfg.path("catalog"))?;
    let sessions = read_sessions(&cfg.path("sessions_train"))?;
    let texts = paragraph_texts(&sessions, &catalog)?;
    let vocab = keyed("vocab_size", train_bpe(&texts, cfg.usize("vocab_size")))?;
    log::info!("tokenizer: {} tokens, {} merges from {} paragraphs", vocab.len(), vocab.merges().len(), texts.len());
    let out = cfg.path("vocab");
    write_vocab(&out, &vocab)?;
    finish(cfg, vec![out])
}

/// Source tag, factorization and static masking of a preset. The objective
/// follows from the tag.
pub fn preset(name: &str) -> Result<(SourceTag, bool, bool)> {
    Ok(match name {
        "bert-like" => (SourceTag::MlmBertLike, false, true),
        "roberta-like" => (SourceTag::MlmRobertaLike, false, false),
        "albert-like" => (SourceTag::MlmAlbertLike, true, true),
        "xlnet-like" => (SourceTag::PlmXlnetLike, false, false),
        other => return Err(Error::config("preset", format!("unknown preset {other:?}"))),
    })
}

fn objective_for(tag: SourceTag, cfg: &RunConfig) -> ObjectiveConfig {
    let base = if tag == SourceTag::PlmXlnetLike { ObjectiveConfig::plm() } else { ObjectiveConfig::mlm() };
    ObjectiveConfig { mask_prob: cfg.f64("mask_prob"), predict_fraction: cfg.f64("predict_fraction"), ..base }
}

fn encode_sessions(sessions: &[Session], catalog: &Catalog, vocab: &BpeVocab, max_len: usize) -> Result<Vec<Vec<usize>>> {
    let texts = paragraph_texts(sessions, catalog)?;
    Ok(pretrain::prepare_sequences(texts.iter().map(|t| vocab.encode(t)), max_len))
}

pub fn model_config(cfg: &RunConfig, vocab_size: usize, factorized: bool) -> ModelConfig {
    ModelConfig {
        n_layers: cfg.usize("n_layers"),
        n_heads: cfg.usize("n_heads"),
        d_model: cfg.usize("d_model"),
        d_ff: cfg.usize("d_ff"),
        max_len: cfg.usize("max_len"),
        vocab_size,
        embed_factor: factorized.then(|| cfg.usize("embed_factor")),
        dropout: cfg.f64("dropout"),
        seed: derive_seed(cfg.u64("seed"), INIT_STREAM),
    }
}

pub fn pretrain(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (tag, factorized, static_masks) = preset(cfg.str("preset"))?;
    let catalog = read_catalog(&cfg.path("catalog"))?;
    let vocab = read_vocab(&cfg.path("vocab"))?;
    let mcfg = model_config(cfg, vocab.len(), factorized);
    keyed("preset", mcfg.validate())?;
    let train = encode_sessions(&read_sessions(&cfg.path("sessions_train"))?, &catalog, &vocab, mcfg.max_len)?;
    let test = encode_sessions(&read_sessions(&cfg.path("sessions_test"))?, &catalog, &vocab, mcfg.max_len)?;
    let clip = cfg.f64("clip_norm");
    let tcfg = TrainConfig {
        objective: objective_for(tag, cfg),
        epochs: cfg.usize("epochs"),
        batch_size: cfg.usize("batch_size"),
        lr: cfg.f64("lr"),
        warmup_frac: cfg.f64("warmup_frac"),
        clip_norm: (clip > 0.0).then_some(clip),
        adamw: AdamWConfig { weight_decay: cfg.f64("weight_decay"), ..AdamWConfig::default() },
        seed: derive_seed(cfg.u64("seed"), TRAIN_STREAM),
        eval_seed: cfg.u64("eval_seed"),
        static_masks,
    };
    let exec = threads(cfg)?;
    let mut w = init_weights(&mcfg)?;
    log::info!(
        "pretrain {}: {} parameters, {} train / {} test sequences",
        tag.as_str(),
        w.param_count(),
        train.len(),
        test.len()
    );
    let t0 = Instant::now();
    let clock = move || t0.elapsed().as_secs_f64();
    let mut on_epoch = |e: &pretrain::EpochRecord| {
        log::info!(
            "epoch {}: train ppl {:.4}, test ppl {}, {:.1}s",
            e.epoch,
            e.train_ppl,
            e.test_ppl.map_or("-".to_string(), |p| format!("{p:.4}")),
            e.wall_seconds
        );
    };
    let report = pretrain::pretrain(&mut w, &mcfg, &train, &test, &tcfg, &exec, &clock, &mut on_epoch)?;
    let ckpt = cfg.path("checkpoint");
    write_checkpoint(&ckpt, &Checkpoint { config: mcfg, tag, weights: w })?;
    let rep = cfg.path("train_report");
    write_bytes(&rep, render_train_report(&report).as_bytes())?;
    finish(cfg, vec![ckpt.clone(), manifest_path(&ckpt), rep])
}

pub fn w2v(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let catalog = read_catalog(&cfg.path("catalog"))?;
    let texts = paragraph_texts(&read_sessions(&cfg.path("sessions_train"))?, &catalog)?;
    let wcfg = W2VConfig {
        dim: cfg.usize("w2v_dim"),
        min_count: cfg.usize("w2v_min_count"),
        epochs: cfg.usize("w2v_epochs"),
        window: cfg.usize("w2v_window"),
        negatives: cfg.usize("w2v_negatives"),
        lr0: cfg.f64("w2v_lr"),
        seed: derive_seed(cfg.u64("seed"), W2V_STREAM),
        table_size: cfg.usize("w2v_table_size"),
        sample: cfg.f64("w2v_sample"),
    };
    keyed("w2v", wcfg.validate())?;
    let model = keyed("w2v_min_count", train_skipgram(&texts, &wcfg))?;
    for (i, l) in model.epoch_losses.iter().enumerate() {
        log::info!("w2v epoch {}: mean loss {l:.4}", i + 1);
    }
    let out = cfg.path("vectors");
    write_vectors(&out, &model.vectors())?;
    finish(cfg, vec![out])
}

pub fn embed(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let catalog = read_catalog(&cfg.path("catalog"))?;
    let store: EmbeddingStore = match cfg.str("source") {
        "w2v" => {
            let (store, missing) = embed_catalog_w2v(&read_vectors(&cfg.path("vectors"))?, &catalog)?;
            if let Some(first) = missing.first() {
                return Err(Error::config(
                    "vectors",
                    format!("{} products have no in-vocabulary word (first: {first})", missing.len()),
                ));
            }
            store
        }
        _ => {
            let ck = read_checkpoint(&cfg.path("checkpoint"))?;
            let vocab = read_vocab(&cfg.path("vocab"))?;
            if vocab.len() != ck.config.vocab_size {
                return Err(Error::config(
                    "vocab",
                    format!("has {} tokens but the checkpoint expects {}", vocab.len(), ck.config.vocab_size),
                ));
            }
            embed_catalog(&ck.weights, &ck.config, &vocab, &catalog, ck.tag, &threads(cfg)?)?
        }
    };
    log::info!("embed: {} products, dim {}, source {}", store.len(), store.dim(), store.tag().as_str());
    let out = cfg.path("store");
    write_store(&out, &store)?;
    finish(cfg, vec![out])
}

pub fn eval_npr(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let store = read_store(&cfg.path("store"))?;
    let catalog = read_catalog(&cfg.path("catalog"))?;
    let sessions = read_sessions(&cfg.path("sessions_test"))?;
    let ncfg = NprConfig { negatives: cfg.usize("npr_negatives"), seed: derive_seed(cfg.u64("seed"), NPR_STREAM) };
    let report = evaluate_npr(&sessions, &catalog, &store, &ncfg, &threads(cfg)?).map_err(|e| match e {
        prodembed_core::Error::EmptyInput(_) => Error::config(
            "npr_negatives",
            format!(
                "no test session yields a query (3+ products of one category and gender, plus {} negatives)",
                ncfg.negatives
            ),
        ),
        e => e.into(),
    })?;
    log::info!("eval-npr {}: MRR {:.4} over {} queries", store.tag().as_str(), report.mrr, report.queries);
    let out = cfg.path("npr_report");
    write_bytes(&out, render_mrr_report(&report, store.tag().as_str(), ncfg.negatives).as_bytes())?;
    finish(cfg, vec![out])
}

pub fn eval_rank(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let store = read_store(&cfg.path("store"))?;
    let posts = read_posts(&cfg.path("posts"))?;
    let histories = read_histories(&cfg.path("histories"))?;
    let rcfg = RankConfig {
        threshold: cfg.f64("threshold"),
        k: cfg.usize("top_k"),
        test_start: cfg.i64("test_start"),
        history_window: cfg.i64("history_window"),
    };
    let vectors = post_vectors(&posts, &store)?;
    let report = evaluate_rank(&histories, &vectors, &rcfg, &threads(cfg)?)?;
    log::info!("eval-rank {}: NDCG {:.4} over {} users", store.tag().as_str(), report.mean, report.users);
    let out = cfg.path("rank_report");
    write_bytes(&out, render_ndcg_report(&report, store.tag().as_str(), rcfg.threshold, rcfg.k).as_bytes())?;
    finish(cfg, vec![out])
}

pub fn perplexity(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let ck = read_checkpoint(&cfg.path("checkpoint"))?;
    let vocab = read_vocab(&cfg.path("vocab"))?;
    let catalog = read_catalog(&cfg.path("catalog"))?;
    let seqs = encode_sessions(&read_sessions(&cfg.path("corpus"))?, &catalog, &vocab, ck.config.max_len)?;
    let ocfg = objective_for(ck.tag, cfg);
    let r = pretrain::perplexity(&ck.weights, &ck.config, &seqs, &ocfg, cfg.u64("eval_seed"), &threads(cfg)?)?;
    log::info!("perplexity {}: {:.4} over {} tokens", ck.tag.as_str(), r.perplexity(), r.count);
    let out = cfg.path("ppl_report");
    write_bytes(&out, render_perplexity_report(&r, ocfg.objective.as_str(), seqs.len()).as_bytes())?;
    finish(cfg, vec![out])
}

pub fn attention(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let id = cfg.str("product");
    if id.is_empty() {
        return Err(Error::config("product", "a product id is required"));
    }
    let ck = read_checkpoint(&cfg.path("checkpoint"))?;
    let vocab = read_vocab(&cfg.path("vocab"))?;
    let catalog = read_catalog(&cfg.path("catalog"))?;
    let product = catalog.get(id).ok_or_else(|| Error::config("product", format!("{id:?} is not in the catalog")))?;
    let ids = vocab.encode(&product_sentence(product));
    let (layer, head) = (cfg.usize("layer"), cfg.usize("head"));
    if layer >= ck.config.n_layers {
        return Err(Error::config("layer", format!("model has {} layers", ck.config.n_layers)));
    }
    if head >= ck.config.n_heads {
        return Err(Error::config("head", format!("model has {} heads", ck.config.n_heads)));
    }
    let attn = export_attention(&ck.weights, &ck.config, &ids, layer, head)?;
    let tokens: Vec<String> = ids.iter().map(|&t| vocab.display_token(t)).collect();
    let out = cfg.path("attention_csv");
    write_bytes(&out, render_attention_csv(&tokens, &attn).as_bytes())?;
    finish(cfg, vec![out])
}

/// synth → tokenizer → pretrain → embed → eval-npr → eval-rank, or with
/// `source = w2v`, synth → w2v → embed → eval-npr → eval-rank.
pub fn pipeline(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let steps: &[&str] = if cfg.str("source") == "w2v" {
        &["synth", "w2v", "embed", "eval-npr", "eval-rank"]
    } else {
        &["synth", "tokenizer", "pretrain", "embed", "eval-npr", "eval-rank"]
    };
    let mut written = Vec::new();
    for step in steps {
        log::info!("pipeline: {step}");
        written.extend(run(&cfg.for_command(step)?)?);
    }
    let manifest = cfg.write_beside(&Path::new(cfg.str("workdir")).join("pipeline"))?;
    written.push(manifest);
    Ok(written)
}
