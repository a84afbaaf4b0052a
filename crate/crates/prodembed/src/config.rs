//! Run configuration: a flat `key = value` file plus command-line flags.
//!
//! Every key is declared once in [`PARAMS`] with its default, help text and
//! the commands that read it. Values are resolved as defaults, then the
//! config file, then flags. A file may carry keys for other commands (so
//! one file can drive a whole pipeline) but unknown keys are errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::formats::{read_text, write_bytes};
use crate::{Error, Result};

pub const COMMANDS: [&str; 10] = [
    "synth",
    "tokenizer",
    "pretrain",
    "w2v",
    "embed",
    "eval-npr",
    "eval-rank",
    "perplexity",
    "export-attention",
    "pipeline",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Str,
    Path,
    Usize,
    U64,
    I64,
    F64,
    Choice(&'static [&'static str]),
}

#[derive(Debug, PartialEq)]
pub struct Param {
    pub key: &'static str,
    pub default: &'static str,
    pub kind: Kind,
    pub help: &'static str,
    /// Space-separated command names, or `*` for all.
    pub commands: &'static str,
}

impl Param {
    pub fn used_by(&self, command: &str) -> bool {
        self.commands == "*" || self.commands.split(' ').any(|c| c == command)
    }

    pub fn flag(&self) -> String {
        self.key.replace('_', "-")
    }
}

pub const PRESETS: [&str; 4] = ["bert-like", "roberta-like", "albert-like", "xlnet-like"];
pub const SOURCES: [&str; 2] = ["checkpoint", "w2v"];

const fn p(key: &'static str, default: &'static str, kind: Kind, commands: &'static str, help: &'static str) -> Param {
    Param { key, default, kind, help, commands }
}

use Kind::*;

#[rustfmt::skip]
pub static PARAMS: &[Param] = &[
    p("workdir", ".", Str, "*", "directory relative paths are resolved against"),
    p("seed", "0", U64, "*", "master seed; every random stream derives from it"),
    p("threads", "1", Usize, "*", "worker threads for per-item work (results do not depend on it)"),

    p("catalog", "catalog.tsv", Path, "synth tokenizer pretrain w2v embed eval-npr perplexity export-attention pipeline", "product catalog"),
    p("sessions_train", "sessions.train.tsv", Path, "synth tokenizer pretrain w2v pipeline", "training sessions"),
    p("sessions_test", "sessions.test.tsv", Path, "synth pretrain eval-npr pipeline", "held-out sessions"),
    p("posts", "posts.tsv", Path, "synth eval-rank pipeline", "posts and their tagged products"),
    p("histories", "histories.tsv", Path, "synth eval-rank pipeline", "user engagement histories"),
    p("vocab", "vocab.json", Path, "tokenizer pretrain embed perplexity export-attention pipeline", "BPE vocabulary"),
    p("checkpoint", "model.ckpt", Path, "pretrain embed perplexity export-attention pipeline", "transformer checkpoint"),
    p("train_report", "train_report.tsv", Path, "pretrain pipeline", "per-epoch loss and perplexity"),
    p("vectors", "vectors.txt", Path, "w2v embed pipeline", "word vectors"),
    p("source", "checkpoint", Choice(&SOURCES), "embed pipeline", "embedding source"),
    p("store", "embeddings.store", Path, "embed eval-npr eval-rank pipeline", "product embedding store"),
    p("npr_report", "npr_report.tsv", Path, "eval-npr pipeline", "next-product MRR report"),
    p("rank_report", "rank_report.tsv", Path, "eval-rank pipeline", "posts-ranking NDCG report"),
    p("corpus", "sessions.test.tsv", Path, "perplexity", "sessions to score"),
    p("ppl_report", "perplexity.tsv", Path, "perplexity", "perplexity report"),
    p("attention_csv", "attention.csv", Path, "export-attention", "attention matrix output"),
    p("product", "", Str, "export-attention", "product id whose sentence is encoded"),
    p("layer", "0", Usize, "export-attention", "layer index"),
    p("head", "0", Usize, "export-attention", "head index"),

    p("n_products", "600", Usize, "synth pipeline", "catalog size"),
    p("n_sessions", "1000", Usize, "synth pipeline", "number of sessions"),
    p("n_archetypes", "2", Usize, "synth pipeline", "number of shopper archetypes"),
    p("focus", "0.15", F64, "synth pipeline", "fraction of each attribute's values an archetype favours"),
    p("concentration", "0.97", F64, "synth pipeline", "probability mass on favoured values"),
    p("session_len_min", "2", Usize, "synth pipeline", "shortest raw session"),
    p("session_len_max", "30", Usize, "synth pipeline", "longest raw session"),
    p("n_posts", "400", Usize, "synth pipeline", "number of posts"),
    p("n_users", "200", Usize, "synth pipeline", "number of users with histories"),
    p("affinity", "0.9", F64, "synth pipeline", "probability an engaged post matches the user's archetype"),
    p("train_fraction", "0.8", F64, "synth pipeline", "share of sessions written to the training file"),
    p("test_start", "1700000000", I64, "synth eval-rank pipeline", "first timestamp of the ranking test period"),

    p("vocab_size", "2000", Usize, "tokenizer pipeline", "target BPE vocabulary size"),

    p("preset", "bert-like", Choice(&PRESETS), "pretrain pipeline", "architecture and objective preset"),
    p("n_layers", "2", Usize, "pretrain pipeline", "transformer layers"),
    p("n_heads", "2", Usize, "pretrain pipeline", "attention heads"),
    p("d_model", "64", Usize, "pretrain pipeline", "hidden size"),
    p("d_ff", "256", Usize, "pretrain pipeline", "feed-forward size"),
    p("max_len", "128", Usize, "pretrain pipeline", "positions; longer paragraphs are truncated"),
    p("embed_factor", "32", Usize, "pretrain pipeline", "factorized embedding size (albert-like only)"),
    p("dropout", "0.1", F64, "pretrain pipeline", "dropout during training"),
    p("epochs", "2", Usize, "pretrain pipeline", "training epochs"),
    p("batch_size", "8", Usize, "pretrain pipeline", "sequences per optimizer step"),
    p("lr", "0.001", F64, "pretrain pipeline", "peak learning rate"),
    p("warmup_frac", "0.1", F64, "pretrain pipeline", "fraction of steps spent warming up"),
    p("clip_norm", "1", F64, "pretrain pipeline", "global gradient-norm clip (0 disables)"),
    p("weight_decay", "0.01", F64, "pretrain pipeline", "decoupled weight decay on matrices"),
    p("mask_prob", "0.15", F64, "pretrain perplexity pipeline", "MLM masking probability"),
    p("predict_fraction", "0.16666666666666666", F64, "pretrain perplexity pipeline", "PLM share of positions predicted"),
    p("eval_seed", "12345", U64, "pretrain perplexity pipeline", "seed of the fixed evaluation masks"),

    p("w2v_dim", "64", Usize, "w2v pipeline", "word vector size"),
    p("w2v_min_count", "20", Usize, "w2v pipeline", "minimum word frequency"),
    p("w2v_epochs", "5", Usize, "w2v pipeline", "passes over the corpus"),
    p("w2v_window", "5", Usize, "w2v pipeline", "context window radius"),
    p("w2v_negatives", "5", Usize, "w2v pipeline", "negative samples per pair"),
    p("w2v_lr", "0.025", F64, "w2v pipeline", "initial learning rate"),
    p("w2v_table_size", "1000000", Usize, "w2v pipeline", "negative-sampling table size"),
    p("w2v_sample", "0.001", F64, "w2v pipeline", "frequent-word subsampling threshold (0 disables)"),

    p("npr_negatives", "20", Usize, "eval-npr pipeline", "negatives per next-product query"),
    p("threshold", "1", F64, "eval-rank pipeline", "Ward merge-distance threshold"),
    p("top_k", "10", Usize, "eval-rank pipeline", "medoid posts kept per user"),
    p("history_window", "31536000", I64, "eval-rank pipeline", "history length before test_start, seconds"),
];

pub fn param(key: &str) -> Option<&'static Param> {
    PARAMS.iter().find(|p| p.key == key)
}

fn check(p: &Param, value: &str) -> Result<()> {
    let fail = |what: &str| Err(Error::config(p.key, format!("{value:?} is not {what}")));
    let ok = match p.kind {
        Str | Path => true,
        Usize => value.parse::<usize>().is_ok(),
        U64 => value.parse::<u64>().is_ok(),
        I64 => value.parse::<i64>().is_ok(),
        F64 => value.parse::<f64>().is_ok_and(f64::is_finite),
        Choice(opts) => {
            if !opts.contains(&value) {
                return fail(&format!("one of {}", opts.join(", ")));
            }
            true
        }
    };
    if ok {
        Ok(())
    } else {
        fail(match p.kind {
            Usize | U64 => "a non-negative integer",
            I64 => "an integer",
            _ => "a finite number",
        })
    }
}

/// Resolved parameters for one command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    command: String,
    values: Vec<(&'static Param, String)>,
}

impl RunConfig {
    pub fn defaults(command: &str) -> Result<Self> {
        if !COMMANDS.contains(&command) {
            return Err(Error::config("command", format!("unknown command {command:?}")));
        }
        let values = PARAMS.iter().filter(|p| p.used_by(command)).map(|p| (p, p.default.to_string())).collect();
        Ok(RunConfig { command: command.to_string(), values })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Sets `key`. Keys the command does not read are ignored; unknown keys
    /// and malformed values are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let p = param(key).ok_or_else(|| Error::config(key, "unknown key"))?;
        check(p, value)?;
        if let Some(slot) = self.values.iter_mut().find(|(q, _)| q.key == key) {
            slot.1 = value.to_string();
        } else {
            log::debug!("{}: ignoring `{key}`", self.command);
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, n + 1, "expected `key = value`"))?;
            self.set(k.trim(), v.trim()).map_err(|e| match e {
                Error::Config { key, msg } => Error::parse(path, n + 1, format!("`{key}`: {msg}")),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        self.apply_text(&read_text(path)?, path)
    }

    /// The same values viewed from another command.
    pub fn for_command(&self, command: &str) -> Result<Self> {
        let mut out = RunConfig::defaults(command)?;
        for (p, v) in &self.values {
            out.set(p.key, v)?;
        }
        Ok(out)
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .iter()
            .find(|(p, _)| p.key == key)
            .map(|(_, v)| v.as_str())
            .unwrap_or_else(|| panic!("`{key}` is not a parameter of {}", self.command))
    }

    pub fn str(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn usize(&self, key: &str) -> usize {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn i64(&self, key: &str) -> i64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.raw(key).parse().expect("validated on set")
    }

    pub fn path(&self, key: &str) -> PathBuf {
        Path::new(self.raw("workdir")).join(self.raw(key))
    }

    /// `# prodembed <command>` followed by every resolved key in table order.
    pub fn render(&self) -> String {
        let mut out = format!("# prodembed {}\n", self.command);
        for (p, v) in &self.values {
            let _ = writeln!(out, "{} = {v}", p.key);
        }
        out
    }

    /// Writes [`RunConfig::render`] next to `primary` as `<primary>.run.conf`.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf> {
        let mut s = primary.as_os_str().to_owned();
        s.push(".run.conf");
        let path = PathBuf::from(s);
        write_bytes(&path, self.render().as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_consistent() {
        for (i, p) in PARAMS.iter().enumerate() {
            assert!(PARAMS[..i].iter().all(|q| q.key != p.key), "duplicate {}", p.key);
            check(p, p.default).unwrap_or_else(|e| panic!("default of {}: {e}", p.key));
            assert!(p.commands == "*" || p.commands.split(' ').all(|c| COMMANDS.contains(&c)), "{}", p.key);
        }
    }

    #[test]
    fn file_then_flags() {
        let mut c = RunConfig::defaults("pretrain").unwrap();
        c.apply_text("# comment\nepochs = 7\n\nlr=0.5\nn_sessions = 3\n", Path::new("a.conf")).unwrap();
        c.set("epochs", "9").unwrap();
        assert_eq!(c.usize("epochs"), 9);
        assert_eq!(c.f64("lr"), 0.5);
        assert!(c.render().contains("\nepochs = 9\n"));
        assert!(!c.render().contains("n_sessions"));
    }

    #[test]
    fn errors_name_the_key() {
        let mut c = RunConfig::defaults("synth").unwrap();
        let e = c.apply_text("bogus = 1\n", Path::new("a.conf")).unwrap_err().to_string();
        assert!(e.contains("a.conf:1") && e.contains("bogus"), "{e}");
        let e = c.set("n_sessions", "-3").unwrap_err().to_string();
        assert!(e.contains("n_sessions"), "{e}");
        let e = c.set("preset", "gpt-like").unwrap_err().to_string();
        assert!(e.contains("preset") && e.contains("bert-like"), "{e}");
        assert!(c.set("focus", "NaN").is_err());
    }

    #[test]
    fn render_round_trips() {
        let mut c = RunConfig::defaults("eval-rank").unwrap();
        c.set("threshold", "2.5").unwrap();
        let mut d = RunConfig::defaults("eval-rank").unwrap();
        d.apply_text(&c.render(), Path::new("x")).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn paths_resolve_against_workdir() {
        let mut c = RunConfig::defaults("embed").unwrap();
        c.set("workdir", "out").unwrap();
        assert_eq!(c.path("store"), Path::new("out").join("embeddings.store"));
    }
}
