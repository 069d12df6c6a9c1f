use std::process::ExitCode;

use caa_cli::args::{Cli, Command};
use caa_cli::commands;
use clap::Parser;

fn threads_from_env() -> Option<usize> {
    let v = std::env::var("CAA_THREADS").ok()?;
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            eprintln!("warning: ignoring CAA_THREADS={v:?}");
            None
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<commands::Outcome> {
    match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a, cli.deterministic),
        Command::Eval(a) => commands::eval(a),
        Command::Stats(a) => commands::stats(a),
        Command::Plot(a) => commands::plot(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match threads_from_env() {
        Some(n) => caa_core::par::with_threads(n, || run(&cli)),
        None => run(&cli),
    };
    match result {
        Ok(out) => {
            eprintln!("report: {}", out.report_path.display());
            if out.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
