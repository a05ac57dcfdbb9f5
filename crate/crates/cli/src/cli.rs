use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use qcqmc_core::TrialKind;

#[derive(Debug, Parser)]
#[command(name = "qcqmc", version, about = "Shot-noise-limited GFMC on the transverse-field Ising chain")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed for every derived stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact ground state by Lanczos; prints JSON on stdout.
    Ed(EdArgs),
    /// Noisy versus exact local energies over the whole basis.
    Scan(ScanArgs),
    /// Independent GFMC chains at one shot budget, or noiseless.
    Gfmc(GfmcArgs),
    /// Full (L, M, replicate) sweep with prefactor and exponential fits.
    Sweep(SweepArgs),
    /// Shot count and QPU wall time for a larger chain.
    Extrapolate(ExtrapolateArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct ModelArgs {
    /// System size(s), comma separated where a list is accepted.
    #[arg(long = "L", value_delimiter = ',')]
    pub sites: Vec<usize>,
    #[arg(long = "J")]
    pub coupling: Option<f64>,
    #[arg(long = "Gamma")]
    pub field: Option<f64>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct ChainArgs {
    /// Diagonal shift, a number or `auto`.
    #[arg(long)]
    pub lambda_shift: Option<String>,
    #[arg(long)]
    pub chain_length: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub l_reweight: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EdArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Residual tolerance.
    #[arg(long, default_value_t = qcqmc_core::exact::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Shots per basis state, `M = M0 * 2^L`.
    #[arg(long = "M0")]
    pub m0: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub trial: Option<TrialKind>,
}

#[derive(Debug, Args)]
pub struct GfmcArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long = "M0")]
    pub m0: Option<u64>,
    /// Explicit shot count; overrides `--M0`.
    #[arg(long = "M")]
    pub shots: Option<u64>,
    /// Use the exact amplitudes instead of a noisy table.
    #[arg(long, conflicts_with_all = ["m0", "shots"])]
    pub noiseless: bool,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub trial: Option<TrialKind>,
    /// Also write every chain as `chain_L{L}_rep{r}.csv`.
    #[arg(long)]
    pub dump_chains: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long = "M0")]
    pub m0: Option<u64>,
    /// Explicit shot grid, used for every size.
    #[arg(long = "M", value_delimiter = ',')]
    pub shots: Vec<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub trial: Option<TrialKind>,
}

#[derive(Debug, Args)]
pub struct ExtrapolateArgs {
    /// Prefactor of `M* = a 2^{b L}`.
    #[arg(long, default_value_t = 29.9)]
    pub a: f64,
    #[arg(long, default_value_t = 0.982)]
    pub b: f64,
    /// Take `a` and `b` from a `scaling_summary.json` instead.
    #[arg(long, conflicts_with_all = ["a", "b"])]
    pub summary: Option<PathBuf>,
    /// Error target to read from `--summary`.
    #[arg(long, default_value_t = 0.005)]
    pub target: f64,
    #[arg(long = "L", default_value_t = 40)]
    pub sites: usize,
    #[arg(long, default_value_t = 40)]
    pub layers: u32,
    /// Logical gate clock in Hz.
    #[arg(long, default_value_t = 1e4)]
    pub clock: f64,
    /// Shot count quoted alongside the formula value.
    #[arg(long, default_value_t = 1.6e13)]
    pub quoted_shots: f64,
}
