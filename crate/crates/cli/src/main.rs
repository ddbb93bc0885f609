use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use atfcm_cli::commands::bench::{bench_pbin, write_rows};
use atfcm_cli::commands::generate::{generate, Instance};
use atfcm_cli::commands::optimize::{default_workers, optimize, OptimizeOptions, DEFAULT_RUNS};
use atfcm_cli::commands::{evaluate, load_intents, load_scenario, resolve_scenario, validate, SCENARIO_DIR_ENV};
use atfcm_cli::output::{create_dir, to_json};
use atfcm_cli::service::{serve, AppState, DEFAULT_PORT, PORT_ENV};
use atfcm_core::{Error, Evaluator, McConfig, MoeaConfig, PmfConfig, PmfMethod};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Probabilistic sector-congestion evaluation and flow planning.
#[derive(Parser)]
#[command(name = "atfcm", version)]
struct Cli {
    /// Scenario file, or a name looked up in the scenario directory.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Directory searched for scenario names.
    #[arg(long, global = true, env = SCENARIO_DIR_ENV)]
    scenario_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a benchmark scenario.
    Generate {
        #[arg(value_enum)]
        instance: InstanceArg,
    },
    /// Marginals, presence curves, congestion, costs and alarms of a plan.
    Evaluate {
        /// Intent file; nominal targets when omitted.
        #[arg(long)]
        intents: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodArg,
    },
    /// Closed form against Monte-Carlo frequencies.
    Validate {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        intents: Option<PathBuf>,
    },
    /// Seeded NSGA-II runs.
    Optimize(OptimizeArgs),
    /// Micro-benchmarks.
    Bench {
        #[command(subcommand)]
        target: BenchTarget,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, env = PORT_ENV, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Args)]
struct OptimizeArgs {
    /// Run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: usize,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    method: MethodArg,
}

#[derive(Subcommand)]
enum BenchTarget {
    /// Direct versus FFT occupancy PMF timing.
    Pbin {
        #[arg(long, default_value_t = 512)]
        n_max: usize,
        /// Approximate duration of one timing batch, milliseconds.
        #[arg(long, default_value_t = 20)]
        batch_ms: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceArg {
    X,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Fft,
    Auto,
}

impl From<MethodArg> for PmfMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Direct => PmfMethod::Direct,
            MethodArg::Fft => PmfMethod::Fft,
            MethodArg::Auto => PmfMethod::Auto,
        }
    }
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    kind: &'a str,
    message: String,
}

fn fail(kind: &str, message: String) -> ExitCode {
    let report = ErrorReport { error: ErrorDetail { kind, message } };
    eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
    ExitCode::FAILURE
}

fn print<T: Serialize>(value: &T) -> Result<(), Error> {
    print!("{}", to_json(value)?);
    Ok(())
}

fn evaluator(cli: &Cli, method: PmfMethod) -> Result<Evaluator, Error> {
    let path = resolve_scenario(cli.scenario.as_deref(), cli.scenario_dir.as_deref());
    Evaluator::new(&load_scenario(&path)?, PmfConfig::with_method(method))
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let out: &Path = &cli.out;
    match &cli.command {
        Command::Generate { instance } => {
            let instance = match instance {
                InstanceArg::X => Instance::X,
                InstanceArg::Grid => Instance::Grid,
            };
            let path = generate(instance, out)?;
            println!("{}", path.display());
        }
        Command::Evaluate { intents, method } => {
            let ev = evaluator(cli, (*method).into())?;
            let iv = load_intents(&ev, intents.as_deref())?;
            print(&evaluate::evaluate(&ev, &iv, out)?)?;
        }
        Command::Validate { samples, seed, intents } => {
            let ev = evaluator(cli, PmfMethod::Auto)?;
            let iv = load_intents(&ev, intents.as_deref())?;
            let summary = validate::validate(&ev, &iv, &McConfig { samples: *samples, seed: *seed }, out)?;
            print(&summary)?;
            if !summary.passed() {
                return Ok(fail(
                    "validation_failed",
                    format!("{} of {} rows exceed their bound", summary.failures, summary.rows),
                ));
            }
        }
        Command::Optimize(args) => {
            let ev = evaluator(cli, args.method.into())?;
            let defaults = MoeaConfig::default();
            let options = OptimizeOptions {
                seed: args.seed,
                runs: args.runs,
                config: MoeaConfig {
                    population: args.population.unwrap_or(defaults.population),
                    generations: args.generations.unwrap_or(defaults.generations),
                    ..defaults
                },
                workers: args.workers.unwrap_or_else(default_workers),
            };
            print(&optimize(&ev, &options, out)?.manifest)?;
        }
        Command::Bench { target: BenchTarget::Pbin { n_max, batch_ms } } => {
            create_dir(out)?;
            let rows = bench_pbin(*n_max, Duration::from_millis(*batch_ms))?;
            let path = out.join("pbin.csv");
            write_rows(&path, &rows)?;
            println!("{}", path.display());
        }
        Command::Serve { port, host } => {
            let ev = evaluator(cli, PmfMethod::Auto)?;
            let state = AppState::new(ev.scenario().clone())?;
            let addr = SocketAddr::new(*host, *port);
            let runtime = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            runtime.block_on(serve(addr, state))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string()),
    };
    run(&cli).unwrap_or_else(|e| fail(e.kind(), e.to_string()))
}
