//! Command-line front end for the duration-bias Monte Carlo laboratory.
//!
//! Subcommands:
//! - `sim1`: exit-indicator survival scenario, one run per `--gamma` value
//! - `sim2`: job-search scenario with noisy-proxy controls
//! - `toy-check`: run the hand-computed oracle examples and print pass/fail
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error.

use std::env;
use std::process::ExitCode;
use std::time::Instant;

use durbias::config::{flag_help, parse_cli, Kind, OUT_DIR_ENV};
use durbias::report::run_and_emit;
use durbias::toy::run_oracle_checks;

fn usage() -> String {
    format!(
        "\
durbias - Monte Carlo laboratory for duration-dependence estimation under attrition

USAGE:
  durbias sim1 [OPTIONS]       exit-indicator survival scenario
  durbias sim2 [OPTIONS]       three-step job-search scenario
  durbias toy-check            run hand-computed oracle examples
  durbias --help               show this message

SIM1 OPTIONS:
{}
SIM2 OPTIONS:
{}
Values resolve as: defaults, then --config file, then {}, then flags.
Every run echoes its configuration to <out-dir>/resolved_config.
",
        flag_help(Kind::Sim1),
        flag_help(Kind::Sim2),
        OUT_DIR_ENV
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = env::args().skip(1).collect();
    match args.first().map(String::as_str) {
        Some("sim1") => run_scenario(Kind::Sim1, &args[1..]),
        Some("sim2") => run_scenario(Kind::Sim2, &args[1..]),
        Some("toy-check") => toy_check(),
        Some("--help") | Some("-h") => {
            print!("{}", usage());
            ExitCode::SUCCESS
        }
        Some(other) => {
            eprintln!("error: unknown subcommand '{other}'\n");
            eprint!("{}", usage());
            ExitCode::from(1)
        }
        None => {
            eprint!("{}", usage());
            ExitCode::from(1)
        }
    }
}

fn run_scenario(kind: Kind, args: &[String]) -> ExitCode {
    if args.iter().any(|a| a == "--help" || a == "-h") {
        println!("durbias {} options:\n{}", kind.as_str(), flag_help(kind));
        return ExitCode::SUCCESS;
    }
    let scenario = match parse_cli(kind, args) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    println!(
        "{}: n = {}, k = {}, tau_bar = {}, seed = {}",
        kind.as_str(),
        scenario.n,
        scenario.k,
        scenario.tau_bar,
        scenario.seed
    );
    let started = Instant::now();
    match run_and_emit(&scenario) {
        Ok(files) => {
            println!(
                "wrote {} files under {} in {:.1}s",
                files.len(),
                scenario.out_dir.display(),
                started.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn toy_check() -> ExitCode {
    let checks = run_oracle_checks();
    let mut failures = 0;
    for c in &checks {
        if c.passed() {
            println!("PASS  {:<45} expected {:<14} got {}", c.name, c.expected, c.actual);
        } else {
            failures += 1;
            println!("FAIL  {:<45} expected {:<14} got {}", c.name, c.expected, c.actual);
        }
    }
    println!("{} checks, {} failed", checks.len(), failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}
