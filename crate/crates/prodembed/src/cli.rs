//! Command-line surface built from the parameter table, so every config
//! key is also a `--flag` on the commands that read it.

use std::path::Path;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::config::{RunConfig, COMMANDS, PARAMS};
use crate::Result;

fn about(command: &str) -> &'static str {
    match command {
        "synth" => "Generate a synthetic catalog, sessions, posts and user histories",
        "tokenizer" => "Train a BPE vocabulary on training-session paragraphs",
        "pretrain" => "Pre-train a transformer with an architecture preset",
        "w2v" => "Train skip-gram word vectors on training-session paragraphs",
        "embed" => "Embed every catalog product from a checkpoint or word vectors",
        "eval-npr" => "Next-product recommendation MRR on held-out sessions",
        "eval-rank" => "Posts-ranking NDCG over user histories",
        "perplexity" => "Perplexity of a checkpoint on a session file",
        "export-attention" => "Write one attention head for a product sentence as CSV",
        "pipeline" => "Run synth through eval-rank with one configuration",
        _ => "",
    }
}

pub fn command() -> Command {
    let mut root = Command::new("prodembed")
        .about("Contextual product embeddings from session text")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("verbose")
                .short('v')
                .long("verbose")
                .action(ArgAction::Count)
                .global(true)
                .help("more log output on stderr (repeatable)"),
        )
        .arg(
            Arg::new("quiet")
                .short('q')
                .long("quiet")
                .action(ArgAction::SetTrue)
                .global(true)
                .help("only log errors"),
        );
    for name in COMMANDS {
        let mut sub = Command::new(name).about(about(name)).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key = value file; flags override it"),
        );
        for p in PARAMS.iter().filter(|p| p.used_by(name)) {
            let help = if p.default.is_empty() {
                p.help.to_string()
            } else {
                format!("{} [default: {}]", p.help, p.default)
            };
            sub = sub.arg(Arg::new(p.key).long(p.flag()).value_name("VALUE").help(help));
        }
        root = root.subcommand(sub);
    }
    root
}

/// Defaults, then `--config`, then flags.
pub fn resolve(name: &str, m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults(name)?;
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(Path::new(path))?;
    }
    for p in PARAMS.iter().filter(|p| p.used_by(name)) {
        if let Some(v) = m.get_one::<String>(p.key) {
            cfg.set(p.key, v)?;
        }
    }
    Ok(cfg)
}

pub fn log_level(m: &ArgMatches) -> log::LevelFilter {
    if m.get_flag("quiet") {
        return log::LevelFilter::Error;
    }
    match m.get_count("verbose") {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_valid() {
        command().debug_assert();
    }

    #[test]
    fn flags_override_defaults() {
        let m = command().try_get_matches_from(["prodembed", "pretrain", "--epochs", "5", "--d-model", "32"]).unwrap();
        let (name, sub) = m.subcommand().unwrap();
        let cfg = resolve(name, sub).unwrap();
        assert_eq!(cfg.usize("epochs"), 5);
        assert_eq!(cfg.usize("d_model"), 32);
        assert_eq!(cfg.usize("n_layers"), 2);
    }

    #[test]
    fn flags_are_scoped_to_their_commands() {
        assert!(command().try_get_matches_from(["prodembed", "synth", "--epochs", "5"]).is_err());
    }
}
