use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fdrlab",
    version,
    about = "False discovery rate procedures and Monte Carlo error-rate studies"
)]
struct Cli {
    /// Worker threads for simulations; results do not depend on it.
    #[arg(long, global = true, env = "FDRLAB_WORKERS")]
    workers: Option<usize>,

    /// Directory for report files.
    #[arg(long, global = true, default_value = ".")]
    output_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Apply a multiple-testing procedure to a p- or z-value table.
    Adjust(AdjustArgs),
    /// Run the studies listed in a JSON scenario file.
    Simulate(SimulateArgs),
    /// Estimate local and tail fdr curves from a z-value table.
    Fdr(FdrArgs),
    /// Hierarchical testing over an edge-list tree.
    Hier(HierArgs),
    /// FCR-adjusted intervals and FDR-thresholded estimates.
    Ci(CiArgs),
    /// Diagnose z-values against an assumed normal null.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProcedureArg {
    Bh,
    By,
    AdaptiveStepDown,
    TwoStage,
    WeightedBh,
    Bonferroni,
    /// Cluster-level test over the table's `cluster` column.
    Cluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Canonical,
    DeflatedAtQ,
    DeflatedAtStageLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Fisher,
    Stouffer,
    Simes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidednessArg {
    OneSided,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NullArg {
    Theoretical,
    Empirical,
    Both,
}

#[derive(Debug, Args)]
pub struct TableInput {
    /// CSV with columns id and p or z, plus optional weight, cluster, truth.
    #[arg(long)]
    input: PathBuf,
    /// Conversion of z-values to p-values.
    #[arg(long, value_enum, default_value = "two-sided")]
    sidedness: SidednessArg,
}

#[derive(Debug, Args)]
pub struct AdjustArgs {
    #[command(flatten)]
    table: TableInput,
    #[arg(long, value_enum, default_value = "bh")]
    procedure: ProcedureArg,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    /// Null-count estimate used by the two-stage procedure.
    #[arg(long, value_enum, default_value = "canonical")]
    variant: VariantArg,
    /// Combining method for the cluster procedure.
    #[arg(long, value_enum, default_value = "simes")]
    method: MethodArg,
    /// Weight clusters by their size.
    #[arg(long)]
    size_weighting: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the seed of every study in the file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct FdrArgs {
    #[command(flatten)]
    table: TableInput,
    #[arg(long, value_enum, default_value = "both")]
    null: NullArg,
    /// Threshold for the null-proportion estimate under the theoretical null.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
}

#[derive(Debug, Args)]
pub struct HierArgs {
    #[command(flatten)]
    table: TableInput,
    /// Edge-list CSV: node_id, parent_id, member_ids[, p_value].
    #[arg(long)]
    tree: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long, value_enum, default_value = "simes")]
    method: MethodArg,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    /// CSV with columns id, estimate, std_error.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    q: f64,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    table: TableInput,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    location: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.output_dir)?;
    let out = &cli.output_dir;
    match cli.command {
        Command::Adjust(a) => commands::adjust(&a, out),
        Command::Simulate(a) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cli.workers.unwrap_or(0))
                .build()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            pool.install(|| commands::simulate(&a, out))
        }
        Command::Fdr(a) => commands::fdr(&a, out),
        Command::Hier(a) => commands::hier(&a, out),
        Command::Ci(a) => commands::ci(&a, out),
        Command::Diagnose(a) => commands::diagnose(&a, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
