//! `serrin`: verification suites, solvers and the moving-plane harness.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure
//! (non-convergence, or a violated property in `verify`), 3 I/O error.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serrin_core::Error;

use config::{integer, number, pair};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) | Error::Argument(_) | Error::DegenerateDomain(_) => 1,
            Error::Bracket(_)
            | Error::Infeasible(_)
            | Error::Numeric(_)
            | Error::Consistency(_)
            | Error::Convergence { .. }
            | Error::Resolution(_) => 2,
            Error::Parse { .. } => 3,
        };
        Self { code, message: e.to_string() }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "serrin",
    version,
    about = "Pucci operators, overdetermined problems and moving planes on space forms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a randomized property suite (geometry, pucci, lemma21, sphere64, all).
    Verify(VerifyArgs),
    /// Homogeneity exponent of the extremal cone solution.
    ConeBeta(ConeArgs),
    /// Radial solution of the overdetermined problem on a geodesic ball.
    Radial(RadialArgs),
    /// Pucci Dirichlet problem on a 2-D ball or ellipse.
    Solve2d(Solve2dArgs),
    /// Moving-plane sweep on a field exported by `solve2d`.
    MovingPlane(MovingPlaneArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` file; keys are the long flag names, flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, value_parser = number)]
    pub lambda: Option<f64>,
    #[arg(long = "Lambda", value_parser = number)]
    pub big_lambda: Option<f64>,
    #[arg(long, value_parser = number)]
    pub k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// geometry, pucci, lemma21, sphere64 or all.
    pub suite: Option<String>,
    #[arg(long, value_parser = integer::<u64>)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = integer::<usize>)]
    pub trials: Option<usize>,
    /// Pins λ, Λ, k instead of sampling them per trial.
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ConeArgs {
    /// Cone opening in (0, pi]; accepts forms like `pi/2`.
    #[arg(long, value_parser = number)]
    pub theta0: Option<f64>,
    #[arg(long, value_parser = number)]
    pub lambda: Option<f64>,
    #[arg(long = "Lambda", value_parser = number)]
    pub big_lambda: Option<f64>,
    #[arg(long, value_parser = number)]
    pub tol: Option<f64>,
    /// Comma-separated ε list; each row uses Λ = λ(1 + ε).
    #[arg(long)]
    pub sweep: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SourceArgs {
    /// Constant term of f(u) = c − b·u.
    #[arg(long, value_parser = number)]
    pub c: Option<f64>,
    #[arg(long, value_parser = number)]
    pub b: Option<f64>,
    /// `minus` or `plus`.
    #[arg(long)]
    pub sign: Option<String>,
}

#[derive(Debug, Args)]
pub struct RadialArgs {
    /// euclidean, hyperbolic or sphere.
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long = "N", value_parser = integer::<usize>)]
    pub n: Option<usize>,
    #[arg(long = "R", value_parser = number)]
    pub radius: Option<f64>,
    /// Comma-separated radii; emits one `R,c0` row each instead of a profile.
    #[arg(long)]
    pub radii: Option<String>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_parser = number)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Solve2dArgs {
    /// `ball` or `ellipse`.
    #[arg(long)]
    pub domain: Option<String>,
    /// euclidean or hyperbolic.
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long, value_parser = pair)]
    pub center: Option<[f64; 2]>,
    /// Geodesic radius of a ball.
    #[arg(long = "R", value_parser = number)]
    pub radius: Option<f64>,
    #[arg(long = "semi-axes", value_parser = pair)]
    pub semi_axes: Option<[f64; 2]>,
    #[arg(long, value_parser = number)]
    pub h: Option<f64>,
    #[arg(long, value_parser = integer::<usize>)]
    pub width: Option<usize>,
    /// `cut-cell` or `snap`.
    #[arg(long)]
    pub boundary: Option<String>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, value_parser = number)]
    pub tol: Option<f64>,
    #[arg(long = "max-iters", value_parser = integer::<usize>)]
    pub max_iters: Option<usize>,
    /// Boundary-gradient profile CSV.
    #[arg(long = "profile-out")]
    pub profile_out: Option<PathBuf>,
    /// Domain mask CSV, as read by `moving-plane`.
    #[arg(long = "domain-out")]
    pub domain_out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MovingPlaneArgs {
    /// Field CSV `x1,x2,u`.
    #[arg(long)]
    pub field: Option<PathBuf>,
    /// Domain CSV `x1,x2,mask`.
    #[arg(long)]
    pub domain: Option<PathBuf>,
    #[arg(long)]
    pub space: Option<String>,
    /// Symmetry tolerance; defaults to max(5e-3·sup|u|, 10h²).
    #[arg(long, value_parser = number)]
    pub tol: Option<f64>,
    /// `plus`, `minus` or `both`.
    #[arg(long)]
    pub direction: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    // clap reports usage errors with its own exit code; map them to 1
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Verify(a) => commands::verify(a),
        Command::ConeBeta(a) => commands::cone_beta(a),
        Command::Radial(a) => commands::radial(a),
        Command::Solve2d(a) => commands::solve2d(a),
        Command::MovingPlane(a) => commands::moving_plane(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
