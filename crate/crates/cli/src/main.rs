//! Command-line harness: generate code sets, run SNR sweeps with the
//! closed-form, Monte Carlo, bound, and simulation evaluators, and compare
//! sweep outputs.
//!
//! Exit codes: 0 success, 2 validation error, 3 infeasible MC budget.

mod compare;
mod csvio;
mod sensitivity;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mcser_core::codeset::{self, CodeSet, SignalingMode};

/// Marker error for the "MC cannot reach this SER within the cap" refusal.
#[derive(Debug)]
pub struct InfeasibleBudget(pub String);

impl std::fmt::Display for InfeasibleBudget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InfeasibleBudget {}

#[derive(Parser)]
#[command(name = "mcser", version, about = "Symbol error rates for correlated multi-code signaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a code set and write it to a file.
    Generate(GenerateArgs),
    /// Evaluate SER over an SNR grid with the selected evaluators.
    Sweep(sweep::SweepArgs),
    /// Evaluate the union upper bound over an SNR grid.
    Bound(sweep::BoundArgs),
    /// Compare two sweep CSVs and report interpolated dB gaps.
    Compare(compare::CompareArgs),
    /// Taylor sensitivity of the union bound to code correlation.
    Sensitivity(sensitivity::SensitivityArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    QuasiOrthogonal,
    QuasiBiorthogonal,
}

impl From<ModeArg> for SignalingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::QuasiOrthogonal => SignalingMode::QuasiOrthogonal,
            ModeArg::QuasiBiorthogonal => SignalingMode::QuasiBiorthogonal,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    kind: GeneratorKind,
}

#[derive(Subcommand)]
enum GeneratorKind {
    /// First M standard basis vectors of length L.
    Orthogonal {
        #[arg(long)]
        m: usize,
        /// Code length; defaults to M.
        #[arg(long)]
        l: Option<usize>,
        #[command(flatten)]
        common: GenerateCommon,
    },
    /// Equi-correlated set with pairwise correlation eta.
    Equicorr {
        #[arg(long)]
        m: usize,
        #[arg(long, allow_hyphen_values = true)]
        eta: f64,
        #[command(flatten)]
        common: GenerateCommon,
    },
    /// Random correlations uniform in [-rho-max, rho-max], PSD-rejected.
    Random {
        #[arg(long)]
        m: usize,
        /// Code length; defaults to M.
        #[arg(long)]
        l: Option<usize>,
        #[arg(long = "rho-max")]
        rho_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Retry budget for the PSD rejection sampler.
        #[arg(long, default_value_t = codeset::DEFAULT_PSD_RETRY_CAP)]
        retry_cap: u64,
        #[command(flatten)]
        common: GenerateCommon,
    },
    /// Circular shifts of a +/-1 base pattern found by greedy search.
    Circshift {
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 200)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: GenerateCommon,
    },
}

#[derive(Args)]
struct GenerateCommon {
    /// Output code-set file.
    #[arg(short, long)]
    out: PathBuf,
    /// Signaling mode tag to store; defaults to the generator's convention.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let (set, common) = match args.kind {
        GeneratorKind::Orthogonal { m, l, common } => {
            (codeset::make_orthogonal(m, l.unwrap_or(m))?, common)
        }
        GeneratorKind::Equicorr { m, eta, common } => {
            (codeset::make_equicorrelated(m, eta)?, common)
        }
        GeneratorKind::Random { m, l, rho_max, seed, retry_cap, common } => (
            codeset::make_random_quasi_with_cap(m, l.unwrap_or(m), rho_max, seed, retry_cap)?,
            common,
        ),
        GeneratorKind::Circshift { l, restarts, seed, common } => {
            (codeset::make_circular_shift_pm1(l, restarts, seed)?, common)
        }
    };
    let set = match common.mode {
        Some(mode) => set.with_mode(mode.into()),
        None => set,
    };
    codeset::save(&set, &common.out)
        .with_context(|| format!("writing {}", common.out.display()))?;
    print_summary(&set, &common.out);
    Ok(())
}

fn print_summary(set: &CodeSet, path: &std::path::Path) {
    let w = codeset::gram(set);
    println!("wrote {}", path.display());
    println!("  mode            {}", set.mode());
    println!("  M x L           {} x {}", set.m(), set.l());
    println!("  max |kappa|     {:.6}", w.max_abs_off_diagonal());
    println!("  mean |kappa|    {:.6}", w.mean_abs_off_diagonal());
    println!("  min eig of W    {:.6e}", w.min_eigenvalue());
}

/// Parse an SNR grid given either as a comma list ("8,9,10.5") or as an
/// inclusive range with step ("8:14:0.5"). Must be strictly increasing.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>> {
    let grid: Vec<f64> = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("range grid must be start:stop:step, got {text}");
        }
        let (start, stop, step): (f64, f64, f64) =
            (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
        if step <= 0.0 {
            bail!("grid step must be positive");
        }
        let n = ((stop - start) / step).floor() as usize + 1;
        (0..n).map(|i| start + step * i as f64).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(Into::into))
            .collect::<Result<_>>()?
    };
    if grid.is_empty() {
        bail!("SNR grid is empty");
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        bail!("SNR grid must be strictly increasing");
    }
    Ok(grid)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::Sweep(args) => sweep::run_sweep(args),
        Command::Bound(args) => sweep::run_bound(args),
        Command::Compare(args) => compare::run_compare(args),
        Command::Sensitivity(args) => sensitivity::run_sensitivity(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.is::<InfeasibleBudget>() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
