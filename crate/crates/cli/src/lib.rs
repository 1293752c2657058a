//! Experiment harness behind the `inexact` binary.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Outcome;
use crate::config::{AllocationName, Format, GroupName, ModeName, ObjectiveName, ProblemArgs};

#[derive(Parser)]
#[command(name = "inexact", version, about = "Energy/error tradeoffs of noisy Boolean function evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print f(bits) for a problem, or its whole truth table.
    Eval(EvalArgs),
    /// Per-input error report for an energy vector, group and decoder.
    Simulate(SimulateArgs),
    /// Search for the allocation of a budget minimizing an objective.
    Allocate(AllocateArgs),
    /// Clairvoyant vs blindfolded sweep over a budget grid.
    Mobs(MobsArgs),
    /// CMOS switching probability against supply voltage, as CSV `vdd,sigma,p`.
    Curve(CurveArgs),
    /// MoBS summary for OR, UE, BE, comparison and sorting at small sizes.
    Table2(Table2Args),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// TOML experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct ModeArgs {
    /// Exact enumeration or Monte Carlo; exact is picked for n <= 10 when unset.
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    /// Monte Carlo samples per input.
    #[arg(long)]
    samples: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct MetricArgs {
    #[arg(long, value_enum)]
    metric: Option<MetricName>,
    /// Sorting instance scored by the sorting metric, e.g. `4,0`.
    #[arg(long, value_delimiter = ',')]
    instance: Option<Vec<u64>>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MetricName {
    WorstCase,
    ExpectedError,
    Comparison,
    Sorting,
}

#[derive(Args, Clone, Default)]
struct ChannelArgs {
    /// Energy per bit, comma separated.
    #[arg(long, value_delimiter = ',')]
    energies: Option<Vec<f64>>,
    /// Closed-form allocation used when no energies are given.
    #[arg(long, value_enum)]
    allocation: Option<AllocationName>,
    #[arg(long)]
    budget: Option<f64>,
    /// Adversary group; the identity group means the clairvoyant setting.
    #[arg(long, value_enum)]
    group: Option<GroupName>,
    /// Generators of a generated group, e.g. `1,2,0;0,2,1`.
    #[arg(long)]
    generators: Option<String>,
    #[arg(long, value_enum)]
    decoder: Option<DecoderName>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum DecoderName {
    Identity,
    Map,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Input bits, most significant first.
    #[arg(long)]
    bits: Option<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Input rows to score; all rows for n <= 10, a probe set otherwise.
    #[arg(long, value_delimiter = ',')]
    rows: Option<Vec<u64>>,
}

#[derive(Args)]
struct AllocateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveName>,
    #[arg(long, value_enum)]
    method: Option<MethodName>,
    /// Grid spacing in energy units.
    #[arg(long)]
    resolution: Option<f64>,
    /// Descent sweep cap.
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MethodName {
    Grid,
    CoordinateDescent,
}

#[derive(Args)]
struct MobsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    metric: MetricArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Budgets to sweep, comma separated.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<f64>>,
    /// Also try MAP decoding for both champions.
    #[arg(long)]
    map_champion: bool,
    /// Allocation search sweep cap.
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    sigma: Option<f64>,
    /// Supply voltages, comma separated; defaults to 0..=10 sigma in steps of sigma/10.
    #[arg(long, value_delimiter = ',')]
    vdd: Option<Vec<f64>>,
}

#[derive(Args)]
struct Table2Args {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    mode: ModeArgs,
    /// Input sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    map_champion: bool,
    #[arg(long)]
    max_iterations: Option<usize>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<inexact_core::Error>() {
            return match core {
                inexact_core::Error::ResourceLimit(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 1;
        }
    }
    2
}

/// Parses `args` (program name first), runs the subcommand and returns the exit status.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return err.exit_code() as u8;
        }
    };
    match commands::run(cli.command) {
        Ok(Outcome::Done) => 0,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: the allocation search hit its iteration cap; results are flagged converged = false");
            4
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            exit_code(&err)
        }
    }
}
