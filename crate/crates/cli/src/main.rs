//! `quadmoments`: run moment-engine, Fock-oracle and comparison scenarios.
//!
//! Exit codes: 0 success, 1 comparison (or product-rule) check failed,
//! 2 unreadable or malformed scenario, 3 scenario fails validation,
//! 4 oracle leaked past its largest cutoff, 5 output could not be written,
//! 6 numerical failure inside a job.

mod jobs;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scenario::{Mode, Overrides, Scenario};

pub const EXIT_COMPARISON: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_LEAKAGE: i32 = 4;
pub const EXIT_IO: i32 = 5;
pub const EXIT_RUNTIME: i32 = 6;

/// An error that ends the process with a specific exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn parse(message: impl Into<String>) -> Self {
        Self { code: EXIT_PARSE, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: EXIT_IO, message: message.into() }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, message: message.into() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "quadmoments", version, about = "Moment dynamics of bosonic modes under quadratic and Poisson-averaged GKSL generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the scenario in the mode named by its `run.mode`.
    Run(CommonArgs),
    /// Parse and validate the scenario without running it.
    Validate(CommonArgs),
    /// Run the engine and the Fock oracle and compare them.
    Compare(CommonArgs),
    /// Check the product rule on a random ensemble (the scenario is optional).
    Leibniz(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Highest moment order.
    #[arg(long, value_name = "M")]
    order: Option<usize>,
    /// Final time of the output grid.
    #[arg(long)]
    t_max: Option<f64>,
    /// Output grid spacing.
    #[arg(long)]
    dt: Option<f64>,
    /// Pass threshold for relative errors or residuals.
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for randomized jobs; recorded in every output header.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for CSV tables and report.json.
    #[arg(long, value_name = "DIR", default_value = "out")]
    output: PathBuf,
}

impl CommonArgs {
    fn overrides(&self, mode: Option<Mode>) -> Overrides {
        Overrides { mode, order: self.order, t_max: self.t_max, dt: self.dt, tol: self.tol, seed: self.seed }
    }

    fn scenario(&self, required: bool) -> Result<Scenario, Failure> {
        match &self.config {
            Some(path) => Scenario::load(path),
            None if required => Err(Failure::parse("--config is required for this command")),
            None => Ok(Scenario::default()),
        }
    }
}

fn run(cli: Cli) -> Result<i32, Failure> {
    let (args, mode, required) = match &cli.command {
        Command::Run(a) => (a, None, true),
        Command::Validate(a) => (a, None, true),
        Command::Compare(a) => (a, Some(Mode::Compare), true),
        Command::Leibniz(a) => (a, Some(Mode::LeibnizTest), false),
    };
    let job = args.scenario(required)?.resolve(&args.overrides(mode))?;
    if let Command::Validate(_) = cli.command {
        println!(
            "valid: {} ({}, order {}, {} output times)",
            job.name,
            job.mode.as_str(),
            job.order,
            job.grid.len()
        );
        return Ok(0);
    }
    let outcome = jobs::execute(&job, &args.output)?;
    let r = &outcome.report;
    for o in &r.orders {
        println!("order {}: max rel {:.3e}, mean rel {:.3e}", o.order, o.max_rel, o.mean_rel);
    }
    if let Some(o) = &r.oracle {
        println!("oracle cutoff {}, max leakage {:.3e}{}", o.cutoff, o.max_leakage, if o.leaked { " (LEAKED)" } else { "" });
    }
    if let Some(l) = &r.leibniz {
        println!("product rule: {} instances, max relative residual {:.3e}", l.instances, l.max_relative_residual);
    }
    println!(
        "{}: {} -> {}",
        if r.passed { "PASS" } else { "FAIL" },
        r.scenario,
        args.output.join(r.files.last().map_or("", String::as_str)).display()
    );
    Ok(outcome.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
