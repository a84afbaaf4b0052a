//! Text reports. Each starts with `key<TAB>value` summary lines, followed
//! by a column header and line-delimited records. Floats use shortest
//! round-trip formatting; nothing time-dependent is written.

use std::fmt::Write as _;

use prodembed_core::evalnpr::{random_mrr, MrrReport};
use prodembed_core::evalrank::NdcgReport;
use prodembed_core::pretrain::{PerplexityResult, TrainReport};
use prodembed_core::tensor::Tensor;

/// `epoch<TAB>train_loss<TAB>train_ppl<TAB>test_ppl`, one line per epoch;
/// `test_ppl` is `-` without a test set.
pub fn render_train_report(r: &TrainReport) -> String {
    let mut out = String::from("epoch\ttrain_loss\ttrain_ppl\ttest_ppl\n");
    for e in &r.epochs {
        let test = e.test_ppl.map_or_else(|| "-".to_string(), |p| p.to_string());
        let _ = writeln!(out, "{}\t{}\t{}\t{test}", e.epoch, e.train_loss, e.train_ppl);
    }
    out
}

pub fn render_mrr_report(r: &MrrReport, source: &str, negatives: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "source\t{source}");
    let _ = writeln!(out, "eval_sessions\t{}", r.eval_sessions);
    let _ = writeln!(out, "queries\t{}", r.queries);
    let _ = writeln!(out, "skipped\t{}", r.skipped);
    let _ = writeln!(out, "negatives\t{negatives}");
    let _ = writeln!(out, "mrr\t{}", r.mrr);
    let _ = writeln!(out, "random_mrr\t{}", random_mrr(negatives + 1));
    out.push_str("\nsession_idx\tpositive_id\trank\n");
    for q in &r.records {
        let _ = writeln!(out, "{}\t{}\t{}", q.session_idx, q.positive, q.rank);
    }
    out
}

pub fn render_ndcg_report(r: &NdcgReport, source: &str, threshold: f64, k: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "source\t{source}");
    let _ = writeln!(out, "threshold\t{threshold}");
    let _ = writeln!(out, "top_k\t{k}");
    let _ = writeln!(out, "users\t{}", r.users);
    let _ = writeln!(out, "skipped\t{}", r.skipped);
    let _ = writeln!(out, "mean_ndcg\t{}", r.mean);
    out.push_str("\nuser_id\tndcg\n");
    for (u, s) in &r.records {
        let _ = writeln!(out, "{u}\t{s}");
    }
    out
}

pub fn render_perplexity_report(r: &PerplexityResult, objective: &str, sequences: usize) -> String {
    format!(
        "objective\t{objective}\nsequences\t{sequences}\ntokens\t{}\nmean_loss\t{}\nperplexity\t{}\n",
        r.count,
        r.mean_loss(),
        r.perplexity()
    )
}

/// Attention weights as CSV: a header of key tokens, then one row per
/// query token.
pub fn render_attention_csv(tokens: &[String], attn: &Tensor) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["query\\key".to_string()];
    header.extend(tokens.iter().cloned());
    w.write_record(&header).expect("in-memory write");
    for (i, tok) in tokens.iter().enumerate() {
        let mut row = vec![tok.clone()];
        row.extend(attn.row(i).iter().map(|x| x.to_string()));
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

/// Value of a `key<TAB>value` summary line.
pub fn summary_value<'a>(report: &'a str, key: &str) -> Option<&'a str> {
    report
        .lines()
        .take_while(|l| !l.is_empty())
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
}
