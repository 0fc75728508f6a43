//! `react` command-line interface.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use react_core::response::Catalog;
use react_core::selectors::Algorithm;
use react_harness::emit::{emit_series, emit_trace, write_series, Format};
use react_harness::files::{load_catalog, validate_document, CatalogFile, Scenario};
use react_harness::runs::{run_mode, Mode, RunOptions};
use react_harness::{HarnessError, Result};

/// Overrides `--seed` when set.
const SEED_ENV: &str = "REACT_SEED";

const GENERIC_CATALOG: &str = include_str!("../../../data/catalog_generic.json");

#[derive(Debug, Parser)]
#[command(
    name = "react",
    version,
    about = "Automotive intrusion response engine harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write the selection series.
    Run(RunArgs),
    /// Validate an architecture, catalog or scenario file.
    Validate { file: PathBuf },
    /// Inspect response catalogs.
    Catalog {
        #[command(subcommand)]
        command: CatalogCommand,
    },
}

#[derive(Debug, Subcommand)]
enum CatalogCommand {
    /// List the responses of a catalog (the built-in generic one by default).
    List {
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// saw, lp-max or lp-min.
    #[arg(long = "algo")]
    algorithm: Algorithm,
    /// static, dynamic-success, dynamic-fail, scripted or velocity-sweep.
    #[arg(long, default_value = "static")]
    mode: Mode,
    /// Executions in dynamic modes.
    #[arg(long, default_value_t = 5)]
    iterations: usize,
    /// Seed of the adaptation prefactor. The REACT_SEED variable takes precedence.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Velocities in km/h for the sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 50.0, 100.0])]
    velocities: Vec<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or jsonl.
    #[arg(long, default_value = "csv")]
    format: Format,
    /// Also write per-iteration engine traces of dynamic runs as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record wall-clock selection and list-generation times.
    #[arg(long)]
    timings: bool,
}

fn seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(value) => value.trim().parse().map_err(|_| {
            HarnessError::Argument(format!("{SEED_ENV}=`{value}` is not an unsigned integer"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(HarnessError::Argument(format!("{SEED_ENV}: {e}"))),
    }
}

fn run(args: RunArgs) -> Result<()> {
    if args.iterations == 0 {
        return Err(HarnessError::Argument(
            "--iterations must be at least 1".into(),
        ));
    }
    if let Some(v) = args
        .velocities
        .iter()
        .find(|v| !(v.is_finite() && **v >= 0.0))
    {
        return Err(HarnessError::Argument(format!(
            "velocity must be a non-negative number of km/h, got {v}"
        )));
    }
    let scenario = Scenario::load(&args.scenario)?;
    let opts = RunOptions {
        algorithm: args.algorithm,
        seed: seed(args.seed)?,
        measure_time: args.timings,
    };
    let report = run_mode(
        &scenario,
        opts,
        args.mode,
        args.iterations,
        &args.velocities,
    )?;

    match &args.out {
        Some(path) => emit_series(&report, args.format, path)?,
        None => write_series(&report, args.format, io::stdout().lock()).map_err(|source| {
            HarnessError::Write {
                path: PathBuf::from("<stdout>"),
                source,
            }
        })?,
    }
    if let Some(path) = &args.trace {
        emit_trace(&report, path)?;
    }
    if args.timings {
        eprintln!(
            "list generation: {:.3} ms; peak memory: {}",
            report.list_generation_time_ms,
            report
                .peak_memory_bytes
                .map_or("unavailable".to_owned(), |b| format!("{} KiB", b / 1024))
        );
    }
    Ok(())
}

fn list_catalog(path: Option<&Path>) -> Result<()> {
    let catalog = match path {
        Some(p) => load_catalog(p)?.1,
        None => {
            let file: CatalogFile =
                serde_json::from_str(GENERIC_CATALOG).map_err(|source| HarnessError::Parse {
                    path: PathBuf::from("<built-in catalog>"),
                    source,
                })?;
            file.validate(Path::new("<built-in catalog>"))?
        }
    };
    print_catalog(&catalog).map_err(|source| HarnessError::Write {
        path: PathBuf::from("<stdout>"),
        source,
    })
}

fn print_catalog(catalog: &Catalog) -> io::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:>5}  {:<42} {:>5} {:>7}  applies to",
        "index", "action", "cost", "benefit"
    )?;
    for spec in catalog.responses() {
        let applies = if spec.is_general {
            "all".to_owned()
        } else {
            spec.applicable_results
                .iter()
                .map(|r| serde_json::to_value(r).map(|v| v.as_str().unwrap_or_default().to_owned()))
                .collect::<std::result::Result<Vec<_>, _>>()?
                .join(", ")
        };
        writeln!(
            out,
            "{:>5}  {:<42} {:>5} {:>7}  {}",
            spec.index,
            spec.action,
            react_core::response::response_cost(&spec.cost),
            react_core::response::response_benefit(&spec.benefit),
            applies
        )?;
    }
    out.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => run(args),
        Command::Validate { file } => validate_document(&file).map(|kind| {
            println!("{}: valid {}", file.display(), kind.as_str());
        }),
        Command::Catalog {
            command: CatalogCommand::List { catalog },
        } => list_catalog(catalog.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
