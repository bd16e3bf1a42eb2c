use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod problem;

use problem::Overrides;

/// Maximum-likelihood estimation and sample stabilisation for Gaussian DAG models.
#[derive(Parser, Debug)]
#[command(author, version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Problem file, or `-` for stdin.
    #[arg(long, global = true, default_value = "-")]
    input: String,

    /// Report destination, or `stdout`.
    #[arg(long, global = true, default_value = "stdout")]
    output: String,

    /// Relative rank tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Seed for random stabilisations.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Decreasing epsilon values for the numeric limit.
    #[arg(long, global = true, value_delimiter = ',')]
    eps_grid: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Decide existence and uniqueness of the MLE.
    Classify,
    /// Compute the minimum-norm MLE.
    Estimate,
    /// Build a stabilisation of the sample.
    Stabilize,
    /// Limit of the MLE along a stabilisation path.
    Limit,
    /// Per-vertex conditions for the stabilised MLE to match.
    Check,
    /// Membership of a perturbation in the parameter varieties.
    Membership,
}

/// Failure classes, mapped to exit codes 2 and 3.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Semantic(String),
}

impl From<dagstab::Error> for Failure {
    fn from(e: dagstab::Error) -> Self {
        Failure::Semantic(e.to_string())
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Semantic(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Semantic(m) => m,
        }
    }
}

fn read_input(path: &str) -> Result<String, Failure> {
    let mut text = String::new();
    if path == "-" {
        io::stdin().read_to_string(&mut text).map_err(|e| Failure::Input(format!("reading stdin: {e}")))?;
    } else {
        text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("reading {path}: {e}")))?;
    }
    Ok(text)
}

fn write_output(path: &str, text: &str) -> Result<(), Failure> {
    if path == "stdout" || path == "-" {
        let mut out = io::stdout().lock();
        out.write_all(text.as_bytes()).map_err(|e| Failure::Input(format!("writing stdout: {e}")))
    } else {
        std::fs::write(PathBuf::from(path), text).map_err(|e| Failure::Input(format!("writing {path}: {e}")))
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let c = &cli.common;
    let overrides = Overrides { tol: c.tol, seed: c.seed, eps_grid: c.eps_grid.clone() };
    let p = problem::parse(&read_input(&c.input)?)?.resolve(&overrides)?;
    let report = match cli.command {
        Command::Classify => commands::classify(&p),
        Command::Estimate => commands::estimate(&p),
        Command::Stabilize => commands::stabilize(&p),
        Command::Limit => commands::limit(&p),
        Command::Check => commands::check(&p),
        Command::Membership => commands::membership(&p),
    }?;
    let mut text = serde_json::to_string_pretty(&report).expect("reports serialise");
    text.push('\n');
    write_output(&c.output, &text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
