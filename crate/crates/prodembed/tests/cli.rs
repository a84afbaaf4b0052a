//! Drives the binary end to end on tiny configurations.

use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_prodembed");

const TINY: &str = "\
seed = 5
n_products = 200
n_sessions = 300
n_posts = 60
n_users = 30
vocab_size = 300
d_model = 16
d_ff = 32
max_len = 64
epochs = 1
w2v_dim = 8
w2v_min_count = 1
w2v_table_size = 10000
npr_negatives = 5
";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tiny_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.conf"), TINY).unwrap();
    dir
}

fn digest(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

#[test]
fn help_lists_commands_and_flags() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["synth", "tokenizer", "pretrain", "w2v", "embed", "eval-npr", "eval-rank", "pipeline"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
    let out = Command::new(BIN).args(["pretrain", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("--mask-prob") && text.contains("[default: 0.15]"), "{text}");
    assert!(!text.contains("--w2v-dim"));
}

#[test]
fn bad_settings_fail_with_one_line_naming_the_key() {
    let dir = tiny_dir();
    let d = dir.path();
    std::fs::write(d.join("typo.conf"), "seed = 1\nmask_porb = 0.2\n").unwrap();
    let cases: [&[&str]; 4] = [
        &["synth", "--config", "typo.conf"],
        &["synth", "--n-sessions", "many"],
        &["pretrain", "--preset", "gpt-like"],
        &["synth", "--train-fraction", "1.5"],
    ];
    for (args, key) in cases.iter().zip(["mask_porb", "n_sessions", "preset", "train_fraction"]) {
        let out = run(d, args);
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = stderr(&out);
        assert!(err.contains(key), "{args:?}: {err}");
        if !err.contains("Usage") {
            assert_eq!(err.trim_end().lines().count(), 1, "{err}");
        }
    }
}

#[test]
fn missing_input_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["tokenizer"]);
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.starts_with("error:") && err.contains("catalog.tsv"), "{err}");
}

#[test]
fn run_conf_reproduces_and_inputs_are_untouched() {
    let dir = tiny_dir();
    let d = dir.path();
    ok(d, &["synth", "--config", "tiny.conf"]);
    ok(d, &["w2v", "--config", "tiny.conf", "--seed", "9"]);
    let inputs = ["catalog.tsv", "sessions.train.tsv"].map(|f| digest(&d.join(f)));
    ok(d, &["embed", "--config", "tiny.conf", "--source", "w2v"]);
    ok(d, &["eval-npr", "--config", "tiny.conf", "--seed", "9"]);
    assert_eq!(inputs, ["catalog.tsv", "sessions.train.tsv"].map(|f| digest(&d.join(f))));

    let report = std::fs::read(d.join("npr_report.tsv")).unwrap();
    let conf = std::fs::read_to_string(d.join("npr_report.tsv.run.conf")).unwrap();
    assert!(conf.starts_with("# prodembed eval-npr") && conf.contains("seed = 9"), "{conf}");
    std::fs::rename(d.join("npr_report.tsv.run.conf"), d.join("replay.conf")).unwrap();
    std::fs::remove_file(d.join("npr_report.tsv")).unwrap();
    ok(d, &["eval-npr", "--config", "replay.conf"]);
    assert_eq!(std::fs::read(d.join("npr_report.tsv")).unwrap(), report);
}

#[test]
fn transformer_commands_and_artifacts() {
    let dir = tiny_dir();
    let d = dir.path();
    ok(d, &["synth", "--config", "tiny.conf"]);
    ok(d, &["tokenizer", "--config", "tiny.conf"]);
    ok(d, &["pretrain", "--config", "tiny.conf", "--preset", "bert-like", "--checkpoint", "bert.ckpt"]);
    ok(d, &["pretrain", "--config", "tiny.conf", "--preset", "albert-like", "--embed-factor", "4", "--checkpoint", "albert.ckpt"]);
    let size = |f: &str| std::fs::metadata(d.join(f)).unwrap().len();
    assert!(size("albert.ckpt") < size("bert.ckpt"));
    assert!(d.join("bert.ckpt.manifest").is_file());

    let train = std::fs::read_to_string(d.join("train_report.tsv")).unwrap();
    assert!(train.starts_with("epoch\ttrain_loss\ttrain_ppl\ttest_ppl\n1\t"), "{train}");

    ok(d, &["perplexity", "--config", "tiny.conf", "--checkpoint", "albert.ckpt"]);
    let ppl = std::fs::read_to_string(d.join("perplexity.tsv")).unwrap();
    assert!(ppl.starts_with("objective\tmlm\n"), "{ppl}");

    let catalog = std::fs::read_to_string(d.join("catalog.tsv")).unwrap();
    let product = catalog.split('\t').next().unwrap();
    ok(d, &["export-attention", "--config", "tiny.conf", "--checkpoint", "bert.ckpt", "--product", product]);
    let csv = std::fs::read_to_string(d.join("attention.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), rows[0].split(',').count(), "square matrix with header");
    let out = run(d, &["export-attention", "--config", "tiny.conf", "--checkpoint", "bert.ckpt", "--product", product, "--head", "7"]);
    assert!(stderr(&out).contains("`head`"), "{}", stderr(&out));

    ok(d, &["embed", "--config", "tiny.conf", "--checkpoint", "bert.ckpt"]);
    ok(d, &["eval-rank", "--config", "tiny.conf"]);
    let rank = std::fs::read_to_string(d.join("rank_report.tsv")).unwrap();
    assert!(rank.starts_with("source\tmlm-bert-like\n"), "{rank}");
}

#[test]
fn pipeline_runs_with_word2vec() {
    let dir = tiny_dir();
    let d = dir.path();
    ok(d, &["pipeline", "--config", "tiny.conf", "--source", "w2v", "--workdir", "out"]);
    for f in ["vectors.txt", "embeddings.store", "npr_report.tsv", "rank_report.tsv", "pipeline.run.conf"] {
        assert!(d.join("out").join(f).is_file(), "{f}");
    }
    assert!(!d.join("out/model.ckpt").exists());
}
