use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use copulse::sim::{write_trace, RunOptions, SchedulerPolicy};

mod protocols;
mod scenario;
mod sweep;

use protocols::{execute, Protocol, RunReport};
use scenario::{load_graph, ConfigFile, Scenario};
use sweep::{parse_seeds, parse_sizes, SweepReport, SweepRow};

/// Runs content-oblivious pulse protocols on simulated rings and graphs.
#[derive(Parser)]
#[command(name = "copulse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol once per seed and check its outputs.
    Run(RunArgs),
    /// Run a protocol over a range of ring sizes and fit the pulse growth.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Protocol to run; overrides the config file.
    #[arg(long, value_enum)]
    protocol: Option<Protocol>,
    /// TOML run description.
    #[arg(long)]
    config: Option<PathBuf>,
    /// TOML graph description, for graph-congest.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Delivery order: random, fifo or lifo.
    #[arg(long)]
    policy: Option<String>,
    /// Seeds as `a..b` or a comma list.
    #[arg(long)]
    seeds: Option<String>,
    /// Write a JSON report here.
    #[arg(long)]
    report_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Ring size; overrides the config file.
    #[arg(long)]
    n: Option<usize>,
    /// Write the event trace of the first seed as JSON lines.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Sizes as `a..b` (doubling), `a..b:step` or a comma list.
    #[arg(long)]
    sweep: String,
    /// Fail when the fitted slope exceeds this by more than 0.15.
    #[arg(long)]
    expect_exponent: Option<f64>,
}

struct Setup {
    protocol: Protocol,
    file: ConfigFile,
    policy_name: String,
}

fn setup(common: &Common) -> Result<Setup> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let protocol = match (common.protocol, &file.protocol) {
        (Some(p), _) => p,
        (None, Some(name)) => Protocol::parse(name)?,
        (None, None) => anyhow::bail!("no protocol: pass --protocol or set `protocol` in the config"),
    };
    let policy_name = common.policy.clone().or_else(|| file.policy.clone()).unwrap_or_else(|| "random".into());
    policy_of(&policy_name, 0)?;
    Ok(Setup { protocol, file, policy_name })
}

fn policy_of(name: &str, seed: u64) -> Result<SchedulerPolicy> {
    Ok(match name {
        "random" => SchedulerPolicy::random(seed),
        "fifo" => SchedulerPolicy { seed, ..SchedulerPolicy::fifo() },
        "lifo" => SchedulerPolicy { seed, ..SchedulerPolicy::lifo() },
        other => anyhow::bail!("unknown policy `{other}` (random, fifo, lifo)"),
    })
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn run(args: RunArgs) -> Result<bool> {
    let s = setup(&args.common)?;
    let seeds = match &args.common.seeds {
        Some(text) => parse_seeds(text)?,
        None => vec![s.file.seed.unwrap_or(1)],
    };
    let graph = args.common.graph.as_deref().map(load_graph).transpose()?;
    let mut reports: Vec<RunReport> = Vec::new();
    for (k, &seed) in seeds.iter().enumerate() {
        let sc = Scenario::build(s.protocol, &s.file, args.n, graph.clone(), seed)?;
        let opts = RunOptions { record_trace: k == 0 && args.trace_out.is_some(), ..RunOptions::default() };
        let r = execute(s.protocol, &sc, policy_of(&s.policy_name, seed)?, &opts)?;
        println!(
            "{} n={} seed={} pulses={} quiescent={} {}",
            s.protocol.name(),
            r.n,
            seed,
            r.total_pulses,
            r.quiescent,
            r.failure.as_deref().map_or("ok".to_string(), |f| format!("FAILED: {f}"))
        );
        println!("  outputs: {}", r.outputs);
        if k == 0 {
            if let Some(path) = &args.trace_out {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_trace(&r.trace, BufWriter::new(f))?;
            }
        }
        reports.push(r);
    }
    if let Some(path) = &args.common.report_out {
        write_json(path, &reports)?;
    }
    Ok(reports.iter().all(|r| r.failure.is_none()))
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let s = setup(&args.common)?;
    let seeds = parse_seeds(args.common.seeds.as_deref().unwrap_or("1..20"))?;
    let sizes = parse_sizes(&args.sweep)?;
    let graph = args.common.graph.as_deref().map(load_graph).transpose()?;
    let mut rows = Vec::new();
    for &n in &sizes {
        let mut runs = Vec::new();
        for &seed in &seeds {
            let sc = Scenario::build(s.protocol, &s.file, Some(n), graph.clone(), seed)?;
            runs.push(execute(s.protocol, &sc, policy_of(&s.policy_name, seed)?, &RunOptions::quiet())?);
        }
        rows.push(SweepRow::from_runs(n, &runs));
    }
    let report = SweepReport::fit(s.protocol, rows, args.expect_exponent)?;
    println!("{}", report.table());
    for row in &report.rows {
        for f in &row.failures {
            println!("n={}: {f}", row.n);
        }
    }
    if let Some(path) = &args.common.report_out {
        write_json(path, &report)?;
    }
    if !report.slope_ok() {
        println!("slope exceeds the expected exponent");
    }
    Ok(report.all_passed() && report.slope_ok())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
