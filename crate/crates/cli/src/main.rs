//! Command-line laboratory for summation-by-parts diffusion discretizations:
//! operator verification, penalty stability certification, steady solves,
//! and convergence studies.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sbp-sat-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or load) an operator and run its verification suite
    Verify(CommonArgs),
    /// Certify interface/boundary penalty stability and report consistency
    Stability(CommonArgs),
    /// Solve one steady problem and write the nodal solution
    Solve(CommonArgs),
    /// Run a mesh-refinement study over degrees and penalty families
    Converge(CommonArgs),
}

#[derive(Args)]
pub struct CommonArgs {
    /// Configuration file with key=value lines (flags take precedence)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Operator family: csbp, lgl, lg, or load
    #[arg(long)]
    family: Option<String>,
    /// Polynomial degree, or a comma list for converge grids (e.g. 1,2,3,4)
    #[arg(long)]
    degree: Option<String>,
    /// Nodes per element (defaults: 20 for csbp, degree+1 for lgl/lg)
    #[arg(long)]
    nodes: Option<usize>,
    /// Second-derivative stencil: narrow or wide
    #[arg(long)]
    stencil: Option<String>,
    /// Operator file to load (with --family load)
    #[arg(long)]
    load: Option<PathBuf>,
    /// Penalty family: br2, ldg, bo, cng, custom, or a comma list
    #[arg(long)]
    sat: Option<String>,
    /// Coefficient file for --sat custom
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Borrowing split parameter in (0, 1]
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma list of element counts, strictly ascending (e.g. 8,16,32)
    #[arg(long)]
    elements: Option<String>,
    /// Manufactured problem: cos30 or linear
    #[arg(long)]
    case: Option<String>,
    /// Left boundary condition, dirichlet:<value> or neumann:<value>
    #[arg(long)]
    bc_left: Option<String>,
    /// Right boundary condition, dirichlet:<value> or neumann:<value>
    #[arg(long)]
    bc_right: Option<String>,
    /// Output file (solve) or directory (converge)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Fail (exit 1) when measured rates miss their targets
    #[arg(long)]
    assert_rates: bool,
    /// Relative tolerance for positive-semidefiniteness decisions
    #[arg(long)]
    psd_tol: Option<f64>,
    /// Relative singular-value cutoff for pseudoinverses
    #[arg(long)]
    pinv_tol: Option<f64>,
    /// Multiply operator accuracy tolerances by this factor (>= 1)
    #[arg(long)]
    accuracy_slack: Option<f64>,
}

fn init_thread_pool() {
    if let Ok(text) = std::env::var("SBP_SAT_LAB_THREADS") {
        match text.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                // ignore AlreadyInitialized-style failures: the default pool works
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring SBP_SAT_LAB_THREADS={text:?} (want a positive integer)"),
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let (args, run): (&CommonArgs, fn(&config::RunConfig) -> u8) = match &cli.command {
        Command::Verify(a) => (a, commands::cmd_verify),
        Command::Stability(a) => (a, commands::cmd_stability),
        Command::Solve(a) => (a, commands::cmd_solve),
        Command::Converge(a) => (a, commands::cmd_converge),
    };
    match config::resolve(args) {
        Ok(cfg) => ExitCode::from(run(&cfg)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::EXIT_USAGE)
        }
    }
}
