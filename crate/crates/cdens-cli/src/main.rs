use clap::Parser;

use cdens_cli::args::{Cli, Command};
use cdens_cli::run;

fn main() {
    cdens::exec::configure_threads_from_env();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(args) => run::cmd_estimate(args),
        Command::Bandwidth(args) => run::cmd_bandwidth(args),
        Command::Mc(args) => run::cmd_mc(args),
    };
    match result {
        Ok((text, warnings, code)) => {
            print!("{text}");
            for w in warnings {
                eprintln!("warning: {w}");
            }
            std::process::exit(code);
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.kind as i32);
        }
    }
}
