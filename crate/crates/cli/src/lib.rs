//! Command-line front end for the sigma-form Painleve VI solver: argument
//! parsing, configuration resolution, and the subcommand implementations.
//! The binary in `main.rs` is a thin shell over [`run`].

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{CliError, EXIT_USAGE};
use config::{ConfigFile, Overrides};
use sigma_pvi::Real;

#[derive(Debug, Parser)]
#[command(
    name = "sigma-pvi",
    version,
    about = "Solve the sigma-form Painleve VI tail family and verify its coefficient identities",
    after_help = "Exit codes: 0 ok, 2 identity failure, 3 non-convergence, \
                  4 oracle disagreement, 64 bad usage."
)]
pub struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for artifacts (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Iteration tolerance in the weighted norm.
    #[arg(long, global = true)]
    pub tol: Option<Real>,
    /// Seed for every randomized diagnostic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the sweep (default: one per core).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Re-derive the coefficient tables exactly and check every identity.
    VerifyIdentities,
    /// Compute the remainder on a ray grid, cross-check it against an
    /// inward integration, and certify the contraction.
    Solve,
    /// One solve per asymptotic constant C; writes a summary table.
    Sweep {
        /// Comma-separated complex literals, e.g. `1,0.5,1i,-1,0.5+0.25i`.
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        c_list: Vec<String>,
    },
    /// Evaluate the raw equation residual on a CSV of (t, u, u', u'').
    Residual {
        /// Input table with header t_re,t_im,u_re,u_im,up_re,up_im,upp_re,upp_im.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
    },
    /// Solve and certify across a list of inner radii.
    ContractionReport {
        /// Comma-separated inner radii (default: 50,100,200,400).
        #[arg(long, value_delimiter = ',', value_name = "LIST")]
        rho_list: Vec<Real>,
    },
}

/// Execute a parsed invocation and return the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let parsed: ConfigFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
            Some(parsed)
        }
        None => None,
    };
    let flags = Overrides {
        tol: cli.tol,
        seed: cli.seed,
    };
    let cfg = config::resolve(file.as_ref(), &flags);
    let out = cli
        .out
        .clone()
        .or_else(|| file.as_ref().and_then(|f| f.out_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));

    match &cli.cmd {
        Cmd::VerifyIdentities => commands::cmd_verify_identities(&cfg, &out),
        Cmd::Solve => commands::cmd_solve(&cfg, &out),
        Cmd::Sweep { c_list } => commands::cmd_sweep(&cfg, &out, c_list, cli.workers),
        Cmd::Residual { input } => commands::cmd_residual(&cfg, &out, input),
        Cmd::ContractionReport { rho_list } => {
            commands::cmd_contraction_report(&cfg, &out, rho_list)
        }
    }
}
