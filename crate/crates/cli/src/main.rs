use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dmr::{Family, Penalty};
use dmr_cli::commands::{self, parse_penalty, OutputFormat, SelectOptions, SimulateOptions};

/// Delete-or-merge regressors: joint deletion of continuous predictors and
/// merging of factor levels.
#[derive(Parser)]
#[command(name = "dmr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a model for a CSV dataset.
    Select(SelectArgs),
    /// Run a Monte Carlo study on a built-in experiment.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Binomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct SelectArgs {
    /// CSV file with a header row.
    #[arg(long)]
    input: PathBuf,
    /// Response column.
    #[arg(long)]
    response: Option<String>,
    /// Factor column, optionally with its levels: NAME or NAME=ref,l2,...
    /// Undeclared columns are continuous.
    #[arg(long = "factor", value_name = "NAME[=LEVELS]")]
    factors: Vec<String>,
    /// JSON file declaring `response` and `factors` ([{name, levels}]).
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gaussian")]
    family: FamilyArg,
    /// `bic` (log n) or a positive per-parameter penalty.
    #[arg(long, default_value = "bic", value_parser = parse_penalty)]
    penalty: Penalty,
    /// Linkage parameter in [0, 1]: 0 complete, 1 single.
    #[arg(long, default_value_t = 0.0)]
    linkage: f64,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Experiment 1, 2 or 3.
    #[arg(long)]
    experiment: u8,
    /// Sample-size multiplier.
    #[arg(long, default_value_t = 1)]
    c: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = match cli.command {
        Command::Select(a) => commands::select(
            &SelectOptions {
                input: a.input,
                schema: a.schema,
                response: a.response,
                factors: a.factors,
                family: match a.family {
                    FamilyArg::Gaussian => Family::Gaussian,
                    FamilyArg::Binomial => Family::Binomial,
                },
                penalty: a.penalty,
                linkage: a.linkage,
                format: match a.format {
                    FormatArg::Json => OutputFormat::Json,
                    FormatArg::Csv => OutputFormat::Csv,
                },
            },
            &mut out,
        ),
        Command::Simulate(a) => commands::simulate(
            &SimulateOptions {
                experiment: a.experiment,
                c: a.c,
                reps: a.reps,
                seed: a.seed,
            },
            &mut out,
            &mut std::io::stderr(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
