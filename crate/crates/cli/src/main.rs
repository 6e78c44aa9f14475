#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cli;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command};
use commands::Output;
use error::CliError;

fn run(cli: &Cli, argv: &[String]) -> Result<(), CliError> {
    let out_dir = match &cli.command {
        Command::Analytic(a) => a.out.as_deref(),
        Command::Simulate(a) => a.out.as_deref(),
        Command::Moments(a) => a.out.as_deref(),
        Command::Benchmark(a) => a.out.as_deref(),
        Command::SynthDataset(a) => Some(a.out.as_path()),
        Command::Fixtures(a) => Some(a.out.as_path()),
    };
    let mut out = Output::new(out_dir)?;
    match &cli.command {
        Command::Analytic(a) => commands::analytic(a, &mut out)?,
        Command::Simulate(a) => commands::simulate(a, &mut out)?,
        Command::Moments(a) => commands::moments(a, &mut out)?,
        Command::Benchmark(a) => commands::benchmark(a, &mut out)?,
        Command::SynthDataset(a) => commands::synth_dataset(a, &mut out)?,
        Command::Fixtures(a) => commands::fixtures(a, &mut out)?,
    }
    out.finish(argv)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
