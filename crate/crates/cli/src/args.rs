use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "onfdr", version, about = "Online false discovery rate control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a stream of p-values (CSV `id,pvalue`) online.
    Run(RunArgs),
    /// Monte Carlo FDR and power over a grid of non-null fractions.
    Simulate(SimulateArgs),
    /// Print a coefficient sequence.
    Sequence(SequenceArgs),
    /// Evaluate the kidney-cancer platform trial realisations.
    Kidney(KidneyArgs),
    /// Test levels of several procedures on one simulated stream.
    Trace(TraceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    SumOne,
    SumAlpha,
    Xi,
}

#[derive(Debug, Args)]
pub struct ProcedureArgs {
    /// lord2, lord3, lordpp, saffron, lord-dep, lond, lond-dep or bonferroni.
    #[arg(long, default_value = "lord2")]
    pub procedure: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub w0: Option<f64>,
    #[arg(long)]
    pub b0: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// jm, power:M, logpower:NU, constant, inverse-square or uniform.
    #[arg(long)]
    pub sequence: Option<String>,
    #[arg(long, value_enum)]
    pub normalization: Option<NormArg>,
    /// Horizon N for bounded procedures.
    #[arg(long)]
    pub bound: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub procedure: ProcedureArgs,
    /// Revise the horizon after n hypotheses: `n:Nprime`.
    #[arg(long)]
    pub rebound: Option<String>,
    /// Input CSV; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub input: PathBuf,
    /// Output CSV; `-` writes stdout.
    #[arg(long, default_value = "-")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Gaussian,
    Exponential,
    Constant,
    Platform,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioArg,
    /// Hypotheses per replicate (mixture scenarios).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Comma-separated non-null fractions.
    #[arg(long, default_value = "0.05,0.2,0.5")]
    pub pi1_grid: String,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Comma-separated methods; append `-bounded` to bound an online procedure
    /// at the number of hypotheses. Also: bh, bh-adjusted, uncorrected.
    #[arg(long, default_value = "lord2,lord3,lordpp,saffron,lond,bonferroni")]
    pub procedures: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Experimental arms (platform).
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    /// Target arm size (platform).
    #[arg(long, default_value_t = 70)]
    pub n_target: u64,
    /// Outcome standard deviation (platform).
    #[arg(long, default_value_t = 6.0)]
    pub sigma: f64,
}

#[derive(Debug, Args)]
pub struct SequenceArgs {
    /// jm, power:M, logpower:NU, constant, inverse-square or uniform.
    #[arg(long)]
    pub kind: String,
    /// Rows to print; also the horizon unless `--unbounded`.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub unbounded: bool,
    #[arg(long, value_enum, default_value = "sum-one")]
    pub normalization: NormArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub w0: Option<f64>,
    #[arg(long)]
    pub b0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct KidneyArgs {
    /// Built-in realisation 1..5; all five when omitted.
    #[arg(long, conflicts_with_all = ["y0", "y"])]
    pub scenario: Option<usize>,
    /// Control responders.
    #[arg(long, requires = "y")]
    pub y0: Option<u64>,
    /// Comma-separated responders per arm.
    #[arg(long, requires = "y0")]
    pub y: Option<String>,
    #[arg(long, default_value_t = 0.10)]
    pub alpha: f64,
    #[arg(long, default_value_t = 32)]
    pub n0: u64,
    #[arg(long, default_value_t = 20)]
    pub n_arm: u64,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Non-null mean; defaults to sqrt(ln n).
    #[arg(long)]
    pub effect: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub prob: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Normalize sequences over the n hypotheses.
    #[arg(long)]
    pub bounded: bool,
}
