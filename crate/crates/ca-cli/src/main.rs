//! `ca`: batch command-line front end for the common-agency toolkit.
//!
//! Exit codes: 0 success or pass, 2 usage error, 3 negative verdict,
//! 4 input or evaluation error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use ca_cli::report::{self, Inputs, Report, Verdict};
use ca_cli::{continuous, finite};

#[derive(Parser, Debug)]
#[command(name = "ca")]
#[command(about = "Solve, verify and audit common-agency menu games and their continuous models")]
#[command(version)]
struct Cli {
    /// Write the JSON report to PATH ("-" for stdout in place of the text summary)
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Worker threads for the data-parallel kernels (1 = sequential, 0 = all cores)
    #[arg(long, global = true, env = "CA_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal screening mechanisms of one principal against fixed rival menus
    Solve(finite::SolveArgs),
    /// Certify a menu profile as an equilibrium, or refute every tie-breaking
    Verify(finite::VerifyArgs),
    /// Exact feasibility system for supporting a menu profile
    Support(finite::SupportArgs),
    /// Compatibility of independently optimal mechanisms
    Check(finite::CheckArgs),
    /// Enumerate mutual screening profiles and their compatibility
    FindEquilibria(finite::FindArgs),
    /// Compare principal payoffs across menu profiles
    Pareto(finite::ParetoArgs),
    /// Quadratic-loss delegation model
    #[command(subcommand)]
    Delegation(continuous::DelegationCommand),
    /// Two-seller bundling model
    #[command(subcommand)]
    Bundling(continuous::BundlingCommand),
    /// Kink, Lipschitz and integral audit of a pointwise envelope
    EnvelopeAudit(continuous::EnvelopeArgs),
}

fn dispatch(command: &Command, inputs: &mut Inputs) -> Result<report::Outcome> {
    match command {
        Command::Solve(a) => finite::solve(a, inputs),
        Command::Verify(a) => finite::verify(a, inputs),
        Command::Support(a) => finite::support(a, inputs),
        Command::Check(a) => finite::check(a, inputs),
        Command::FindEquilibria(a) => finite::find_equilibria(a, inputs),
        Command::Pareto(a) => finite::pareto(a, inputs),
        Command::Delegation(c) => continuous::delegation(c, inputs),
        Command::Bundling(c) => continuous::bundling(c, inputs),
        Command::EnvelopeAudit(a) => continuous::envelope(a, inputs),
    }
}

fn emit(cli: &Cli, report: &Report, elapsed: f64) -> Result<()> {
    let json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes") + "\n";
    let mut stdout = std::io::stdout().lock();
    match cli.json.as_deref() {
        Some(p) if p.as_os_str() == "-" => stdout.write_all(json.as_bytes())?,
        Some(p) => {
            std::fs::write(p, &json).with_context(|| format!("cannot write {}", p.display()))?;
            writeln!(stdout, "{}", report.text())?;
        }
        None => {
            writeln!(stdout, "{}", report.text())?;
            writeln!(stdout, "elapsed: {elapsed:.3}s")?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let started = Instant::now();
    let run = || {
        let mut inputs = Inputs::default();
        dispatch(&cli.command, &mut inputs).map(|o| (o, inputs))
    };
    let result = if cli.jobs == 0 { run() } else { common_agency::par::with_jobs(cli.jobs, run) };
    let (outcome, inputs) = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(4);
        }
    };
    let negative = matches!(outcome.verdict, Verdict::Fail(_));
    let report = Report { command: std::env::args().skip(1).collect(), inputs, outcome };
    if let Err(e) = emit(&cli, &report, started.elapsed().as_secs_f64()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(4);
    }
    ExitCode::from(if negative { 3 } else { 0 })
}
