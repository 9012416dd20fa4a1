//! Front end for the `dieroll` binary: argument definitions, file formats
//! and the command implementations.

pub mod commands;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dieroll::cheating::DEFAULT_TOL;
use dieroll::sdp::SolverOptions;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    /// A requested check ran and did not pass.
    #[error("{0}")]
    Check(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 0 success, 1 numerical or check failure, 2 usage error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<dieroll::protocol::ProtocolError> for CliError {
    fn from(e: dieroll::protocol::ProtocolError) -> Self {
        use dieroll::protocol::ProtocolError as P;
        match e {
            P::TooFewOutcomes(_) | P::SubsetSizeOutOfRange { .. } | P::DimensionCap { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<dieroll::cheating::CheatError> for CliError {
    fn from(e: dieroll::cheating::CheatError) -> Self {
        match e {
            dieroll::cheating::CheatError::Protocol(p) => p.into(),
            dieroll::cheating::CheatError::NonPositiveEps(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<dieroll::balancing::BalanceError> for CliError {
    fn from(e: dieroll::balancing::BalanceError) -> Self {
        match e {
            dieroll::balancing::BalanceError::Cheat(c) => c.into(),
            dieroll::balancing::BalanceError::Protocol(p) => p.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dieroll", version, about = "Cheating bounds for quantum die-rolling protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form bounds as truncated percentages, per number of outcomes D
    Table(TableArgs),
    /// Cheating probabilities of the subset protocol (D, m), optionally balanced
    Analyze(AnalyzeArgs),
    /// Check a certificate file against a protocol file
    Verify(VerifyArgs),
    /// Discrimination optimum against the inverse-witness lower bound
    Qsd(QsdArgs),
    /// Honest runs and a chi-square uniformity test
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Interior-point solves only
    Solve,
    /// Closed-form strategies and certificates only
    Certify,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct Tolerances {
    /// Feasibility tolerance for certificate checks
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Solver stops once |primal - dual| <= gap-target * (1 + |primal|)
    #[arg(long, default_value_t = SolverOptions::default().gap_target)]
    pub gap_target: f64,
    /// Relative primal/dual infeasibility accepted by the solver
    #[arg(long, default_value_t = SolverOptions::default().feas_tol)]
    pub feas_tol: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iters)]
    pub max_iters: usize,
}

impl Tolerances {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [("--tol", self.tol), ("--gap-target", self.gap_target), ("--feas-tol", self.feas_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Usage(format!("{name} must be a positive number, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(CliError::Usage("--max-iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions { gap_target: self.gap_target, max_iters: self.max_iters, feas_tol: self.feas_tol }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    #[arg(long, default_value_t = 2)]
    pub d_min: usize,
    #[arg(long, default_value_t = 10)]
    pub d_max: usize,
    /// Compare D = 2..=10 against the published percentages; exit 1 on mismatch
    #[arg(long)]
    pub check: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub m: usize,
    /// Mix in the optimal extension and transport the certificates
    #[arg(long)]
    pub balance: bool,
    #[arg(long, value_enum, default_value_t = Mode::Certify)]
    pub mode: Mode,
    /// Regularization of Alice's certificate [default: 1e-8/D]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Write protocol.json and the certificates into this directory
    #[arg(long)]
    pub emit_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(flatten)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub protocol: PathBuf,
    #[arg(long)]
    pub cert: PathBuf,
    /// Feasibility tolerance
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["ensemble", "from_protocol", "random"])))]
pub struct QsdArgs {
    /// Ensemble JSON {schema, states, priors?, witnesses?}
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    /// Reduced states of the subset protocol, witnesses from its certificate
    #[arg(long, num_args = 2, value_names = ["D", "M"])]
    pub from_protocol: Option<Vec<usize>>,
    /// Seeded random ensemble
    #[arg(long)]
    pub random: bool,
    /// Number of states for --random
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// State dimension for --random
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, env = "DIEROLL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Certificate regularization for --from-protocol [default: 1e-8/D]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Write the ensemble that was used as JSON
    #[arg(long)]
    pub emit_ensemble: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(flatten)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    #[arg(long, env = "DIEROLL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Run the classical subset protocol instead of the quantum one
    #[arg(long)]
    pub classical: bool,
    /// Exit 1 if uniformity is rejected at the 99.9% level
    #[arg(long)]
    pub check: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

pub fn run(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Table(a) => commands::table(a, out),
        Command::Analyze(a) => commands::analyze(a, out),
        Command::Verify(a) => commands::verify(a, out),
        Command::Qsd(a) => commands::qsd(a, out),
        Command::Simulate(a) => commands::simulate(a, out),
    }
}
