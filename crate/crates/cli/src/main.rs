//! Command-line experiment driver.
//!
//! Exit status: 0 on success, 1 for runtime/data errors, 2 for usage
//! and configuration errors, 3 when a simulation aborted (its reports
//! are still written). Logging is controlled by `MEMSIZER_LOG`
//! (error, warn, info, debug).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::Outcome;
use config::{
    cluster_spec, load_config, parse_pattern, parse_scheduler, parse_sizer, run_config, usage,
    FileConfig, UsageError,
};
use memsizer_core::schedulers::SchedulerKind;
use memsizer_core::traceio::Workload;

#[derive(Parser)]
#[command(
    name = "memsizer",
    version,
    about = "Online task memory sizing on a simulated cluster"
)]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory output files are written into.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded cluster simulations and write JSON reports.
    Simulate(SimulateArgs),
    /// Replay a sizer over a workload without a cluster.
    Replay(ReplayArgs),
    /// Fit and distribution reports from one or two traces.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic workload trace.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Workload trace; overrides the config file's workload.
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// original, rank, lff-min, lff-max, gs-min, or gs-max.
    #[arg(long)]
    scheduler: Option<String>,
    /// user, witt-lr, percentile, or ponder.
    #[arg(long)]
    sizer: Option<String>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// Number of identical nodes in the simulated cluster.
    #[arg(long)]
    nodes: Option<u32>,
    /// Cores per node.
    #[arg(long)]
    cores: Option<u32>,
    /// Memory per node, e.g. "96GiB".
    #[arg(long)]
    memory: Option<String>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// user, witt-lr, percentile, or ponder.
    #[arg(long)]
    sizer: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_name = "PATH")]
    trace: Option<PathBuf>,
    /// Second trace for a peak-difference comparison.
    #[arg(long, value_name = "PATH")]
    trace_b: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// linear, noisy-weak, bimodal, or uncorrelated.
    #[arg(long)]
    pattern: Option<String>,
    /// Number of tasks.
    #[arg(long)]
    n: Option<usize>,
}

/// Workload precedence: --trace flag, then the config file's trace,
/// then its synthetic spec.
fn load_workload(cli: &Cli, cfg: &FileConfig, flag: Option<&PathBuf>) -> Result<Workload> {
    if let Some(path) = flag {
        return commands::load_trace(path);
    }
    if let Some(path) = &cfg.workload.trace {
        return commands::load_trace(path);
    }
    if let Some(synth) = &cfg.workload.synthetic {
        let mut spec = synth.to_spec()?;
        if let Some(seed) = cli.seed {
            spec.seed = seed;
        }
        return commands::build_synthetic(&spec);
    }
    Err(usage(
        "no workload configured; pass --trace or define [workload] in the config file",
    ))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate(args) => {
            let workload = load_workload(cli, &cfg, args.trace.as_ref())?;
            let cluster = cluster_spec(
                &cfg.cluster,
                args.nodes,
                args.cores,
                args.memory.as_deref(),
            )?;
            let scheduler = match args.scheduler.as_deref().or(cfg.run.scheduler.as_deref()) {
                Some(name) => parse_scheduler(name)?,
                None => SchedulerKind::Original,
            };
            let sizer = parse_sizer(
                args.sizer
                    .as_deref()
                    .or(cfg.run.sizer.as_deref())
                    .unwrap_or("ponder"),
            )?;
            let run_cfg = run_config(&cfg)?;
            let seed = cli.seed.or(cfg.run.seed).unwrap_or(0);
            let repetitions = args.repetitions.or(cfg.run.repetitions).unwrap_or(1);
            commands::simulate(
                &workload, &cluster, scheduler, sizer, &run_cfg, seed, repetitions, &cli.out,
            )
        }
        Command::Replay(args) => {
            let workload = load_workload(cli, &cfg, args.trace.as_ref())?;
            let sizer = parse_sizer(
                args.sizer
                    .as_deref()
                    .or(cfg.run.sizer.as_deref())
                    .unwrap_or("ponder"),
            )?;
            let sizing = config::sizing_config(&cfg.sizing)?;
            commands::replay(&workload, sizer, &sizing, &cli.out)?;
            Ok(Outcome::Clean)
        }
        Command::Analyze(args) => {
            let workload = load_workload(cli, &cfg, args.trace.as_ref())?;
            let second = args
                .trace_b
                .as_ref()
                .map(|p| commands::load_trace(p))
                .transpose()?;
            commands::analyze(&workload, second.as_ref(), &cli.out)?;
            Ok(Outcome::Clean)
        }
        Command::Generate(args) => {
            let mut spec = cfg
                .workload
                .synthetic
                .as_ref()
                .map(|s| s.to_spec())
                .transpose()?
                .unwrap_or_default();
            if let Some(name) = &args.pattern {
                spec.pattern = parse_pattern(name)?;
            }
            if let Some(n) = args.n {
                spec.n = n;
            }
            if let Some(seed) = cli.seed {
                spec.seed = seed;
            }
            commands::generate(&spec, &cli.out)?;
            Ok(Outcome::Clean)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("MEMSIZER_LOG", "warn"),
    )
    .format_timestamp(None)
    .init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Aborted) => {
            log::warn!("at least one run aborted after exhausting its retry ladder");
            ExitCode::from(3)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
