mod args;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::report::{emit, CliError, Context};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }

    let mut ctx = Context::new(cli.seed);
    let (name, outcome) = match &cli.command {
        Command::Estimate(a) => ("estimate", commands::estimate_cmd(&mut ctx, a)),
        Command::Control(a) => ("control", commands::control_cmd(&mut ctx, a)),
        Command::Pvalues(a) => ("pvalues", commands::pvalues_cmd(&mut ctx, a)),
        Command::Simulate(a) => ("simulate", commands::simulate_cmd(&mut ctx, a)),
        Command::VerifyCt(a) => ("verify-ct", commands::verify_ct_cmd(&mut ctx, a)),
        Command::ExactTest(a) => ("exact-test", commands::exact_test_cmd(&mut ctx, a)),
    };
    if ctx.seed_was_drawn() {
        eprintln!("seed: {} (drawn; pass --seed {0} to replay)", ctx.used_seed().unwrap());
    }

    let output = match outcome {
        Ok(o) => o,
        Err(e) => return fail(&e),
    };
    if let Err(e) = emit(name, &cli, &ctx, &output, cli.csv) {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    match output.failure {
        Some(msg) => {
            eprintln!("check failed: {msg}");
            ExitCode::FAILURE
        }
        None => ExitCode::SUCCESS,
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {}", e.message());
    ExitCode::from(e.exit_code() as u8)
}
