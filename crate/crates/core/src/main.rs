//! `wrsn-sim` command-line entry point.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;

use wrsn_sim::engine::{events_to_csv, run_with_options, RunOptions};
use wrsn_sim::metrics::summary_csv;
use wrsn_sim::sweep::{
    bench_csv, correlation_csv, isac_bench, resolve_jobs, run_sweep, write_atomic, RunFailure,
    SweepSpec, BENCH_SNR_GRID, DEFAULT_DEVICE_COUNTS, DEFAULT_SEEDS,
};
use wrsn_sim::{ScenarioConfig, SchedulerPolicy, SimError, SummaryRow};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUN: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "wrsn-sim", version, about = "Multi-MCV wireless rechargeable sensor network simulator")]
struct Cli {
    /// Scenario configuration (JSON). Defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the seed (the base seed in sweep mode).
    #[arg(long)]
    seed: Option<u64>,

    /// Override the scheduling policy (restricts the sweep to it).
    #[arg(long, value_name = "NAME")]
    policy: Option<SchedulerPolicy>,

    /// Override the device count (restricts the sweep to it).
    #[arg(long, value_name = "N")]
    devices: Option<usize>,

    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Sweep device counts and policies over seeds.
    #[arg(long, conflicts_with = "isac_bench")]
    sweep: bool,

    /// Run the ranging error benchmark over an SNR grid.
    #[arg(long)]
    isac_bench: bool,

    /// Parallel runs in sweep mode.
    #[arg(long, env = "WRSN_SIM_JOBS")]
    jobs: Option<usize>,

    /// Seeds per (device count, policy) in sweep mode.
    #[arg(long, default_value_t = DEFAULT_SEEDS)]
    seeds: usize,

    /// Device counts in sweep mode, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "N,N,...")]
    counts: Option<Vec<usize>>,

    /// Monte-Carlo trials per SNR in benchmark mode.
    #[arg(long, default_value_t = 1000)]
    trials: usize,

    /// Also write the per-step queue snapshots of a single run.
    #[arg(long)]
    dump_queues: bool,

    /// Also write the correlation profile of one echo at this distance (m).
    #[arg(long, value_name = "METERS")]
    dump_correlation: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Run(String),
    Partial(usize),
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) | SimError::Setup(_) | SimError::Json(_) | SimError::Io { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path).map_err(|e| match e {
            SimError::Json(j) => Failure::Config(format!("cannot parse {}: {j}", path.display())),
            SimError::Io { path, source } => Failure::Config(format!("cannot read {path}: {source}")),
            other => Failure::from(other),
        })?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(policy) = cli.policy {
        cfg.scheduler_policy = policy;
    }
    if let Some(n) = cli.devices {
        cfg.n_devices = n;
    }
    cfg.validate().map_err(|v| Failure::from(SimError::Config(v)))?;
    Ok(cfg)
}

fn cmd_run(cli: &Cli, cfg: &ScenarioConfig) -> Result<(), Failure> {
    let options = RunOptions {
        dump_queues: cli.dump_queues,
    };
    let output = run_with_options(cfg, options).map_err(|e| Failure::Run(e.to_string()))?;
    write_atomic(&cli.out.join("report.json"), &output.report.to_json_string())?;
    write_atomic(&cli.out.join("events.csv"), &events_to_csv(&output.events))?;
    if cli.dump_queues {
        let mut lines = String::new();
        for snap in &output.queue_snapshots {
            lines.push_str(&serde_json::to_string(snap).map_err(SimError::from)?);
            lines.push('\n');
        }
        write_atomic(&cli.out.join("queues.jsonl"), &lines)?;
    }
    eprintln!(
        "{} n={} seed={}: {} of {} requests fulfilled, written to {}",
        cfg.scheduler_policy,
        cfg.n_devices,
        cfg.seed,
        output.report.fulfilled_requests,
        output.report.total_requests,
        cli.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepJson<'a> {
    rows: &'a [SummaryRow],
    failures: &'a [RunFailure],
}

fn cmd_sweep(cli: &Cli, cfg: ScenarioConfig) -> Result<(), Failure> {
    let device_counts = match (&cli.counts, cli.devices) {
        (Some(c), _) => c.clone(),
        (None, Some(n)) => vec![n],
        (None, None) => DEFAULT_DEVICE_COUNTS.to_vec(),
    };
    let policies = cli.policy.map_or_else(|| SchedulerPolicy::ALL.to_vec(), |p| vec![p]);
    let spec = SweepSpec {
        device_counts,
        policies,
        seeds: cli.seeds,
        base: cfg,
    };
    let jobs = resolve_jobs(cli.jobs);
    eprintln!("sweep: {} runs on {jobs} threads", spec.run_count());
    let outcome = run_sweep(&spec, jobs)?;
    write_atomic(&cli.out.join("summary.csv"), &summary_csv(&outcome.rows))?;
    let json = SweepJson {
        rows: &outcome.rows,
        failures: &outcome.failures,
    };
    write_atomic(
        &cli.out.join("summary.json"),
        &serde_json::to_string_pretty(&json).map_err(SimError::from)?,
    )?;
    for f in &outcome.failures {
        eprintln!("run failed: {} n={} seed={}: {}", f.policy, f.n_devices, f.seed, f.message);
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Partial(outcome.failures.len()))
    }
}

fn cmd_isac_bench(cli: &Cli, cfg: &ScenarioConfig) -> Result<(), Failure> {
    let rows = isac_bench(&cfg.isac, cfg.sensing_range, &BENCH_SNR_GRID, cli.trials, cfg.seed)?;
    write_atomic(&cli.out.join("isac_bench.csv"), &bench_csv(&rows))?;
    if let Some(d) = cli.dump_correlation {
        let csv = correlation_csv(&cfg.isac, cfg.sensing_range, d, cfg.seed)?;
        write_atomic(&cli.out.join("correlation.csv"), &csv)?;
    }
    eprintln!("isac bench: {} SNR rows written to {}", rows.len(), cli.out.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    if cli.sweep {
        cmd_sweep(cli, cfg)
    } else if cli.isac_bench {
        cmd_isac_bench(cli, &cfg)
    } else {
        cmd_run(cli, &cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: run failed: {msg}");
            ExitCode::from(EXIT_RUN)
        }
        Err(Failure::Partial(n)) => {
            eprintln!("error: {n} sweep run(s) failed; see summary.json");
            ExitCode::from(EXIT_PARTIAL)
        }
    }
}
