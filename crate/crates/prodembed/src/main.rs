use std::io::Write;
use std::process::ExitCode;

use prodembed::{cli, commands};

fn main() -> ExitCode {
    let matches = cli::command().get_matches();
    env_logger::Builder::new()
        .filter_level(cli::log_level(&matches))
        .format(|buf, record| writeln!(buf, "[{}] {}", record.level(), record.args()))
        .init();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = cli::resolve(name, sub).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
