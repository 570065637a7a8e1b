//! `pathsolve`: solve, validate and probe one-dimensional integral equations
//! from an INI scenario file.

mod config;
mod output;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, Overrides, RunConfig};
use output::{config_hash, emit, Report};
use run::RunError;

#[derive(Parser, Debug)]
#[command(name = "pathsolve", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tables of H and Theta with the endpoint classification.
    Transform(Common),
    /// Solve every seed and write the paths.
    Solve(Common),
    /// Residual and closed-form checks.
    Validate(Common),
    /// Convergence under piecewise-linear noise approximations.
    Wz(Common),
    /// Comparison of a lower solution with the maximal solution.
    Compare(Common),
    /// Kolmogorov-Smirnov test of X(T) against a closed-form law.
    Ks(Common),
    /// Terminal spreads under perturbed starting points.
    Davie(Common),
}

#[derive(clap::Args, Debug)]
struct Common {
    /// Scenario file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Run only this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root; each run writes `<root>/<scenario>-<command>/`.
    #[arg(long, value_name = "DIR", env = "PATHSOLVE_OUT", default_value = "out")]
    out: PathBuf,
    /// Grid mesh.
    #[arg(long, value_name = "H")]
    mesh: Option<f64>,
    /// Time horizon.
    #[arg(long, value_name = "T")]
    horizon: Option<f64>,
}

type Runner = fn(&RunConfig, &str) -> Result<Report, RunError>;

impl Command {
    fn parts(&self) -> (&'static str, Runner, &Common) {
        match self {
            Command::Transform(c) => ("transform", run::transform, c),
            Command::Solve(c) => ("solve", run::solve, c),
            Command::Validate(c) => ("validate", run::validate, c),
            Command::Wz(c) => ("wz", run::wz, c),
            Command::Compare(c) => ("compare", run::compare_cmd, c),
            Command::Ks(c) => ("ks", run::ks, c),
            Command::Davie(c) => ("davie", run::davie, c),
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, RunError> {
    let (name, runner, args) = cli.command.parts();
    let path = args.config.display().to_string();
    let text = fs::read_to_string(&args.config).map_err(|source| ConfigError::Io {
        path: path.clone(),
        source,
    })?;
    let ov = Overrides {
        seed: args.seed,
        mesh: args.mesh,
        horizon: args.horizon,
    };
    let cfg = RunConfig::parse(&text, &path, ov)?;
    let hash = config_hash(&text, &format!("{ov:?}"));
    let mut report = runner(&cfg, &hash)?;
    report
        .summary
        .push("status", if report.pass { "pass" } else { "fail" });
    let summary = report.summary.render();
    report.file("summary.txt", summary.clone());
    let dir = emit(&args.out, &format!("{}-{name}", cfg.name), &report.files).map_err(|e| RunError::Io {
        path: args.out.display().to_string(),
        source: e,
    })?;
    print!("{summary}");
    println!("output = {}", dir.display());
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                RunError::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
