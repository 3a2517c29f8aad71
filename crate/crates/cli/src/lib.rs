//! Command-line front end: argument parsing and the four verbs.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use slamorl::cluster_sim::WorkloadSpec;
use slamorl::config::{apply_run_settings, parse_sla, parse_workload, ReportSettings};
use slamorl::domain::{PreferenceMode, ResourceConfig, SlaSpec};
use slamorl::init::HistoricalLog;
use slamorl::orchestrator::{run, write_pareto_csv, write_trace_csv, Method, RunConfig};
use slamorl::reporting::{recommend, render_report, Recommendation, RunSummary};
use slamorl::Error;

#[derive(Parser)]
#[command(name = "slamorl", version, about = "SLA-aware resource optimizer for simulated ML training jobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one workload and write its artifacts.
    Run(RunArgs),
    /// Run every method under every preference and write an improvement matrix.
    Bench(BenchArgs),
    /// Render a report from two saved run summaries.
    Report(ReportArgs),
    /// Print time-critical, cost-critical and balanced allocations.
    Recommend(RecommendArgs),
}

#[derive(Args)]
struct Common {
    /// Run settings file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Disable simulator noise.
    #[arg(long)]
    noiseless: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Workload file (`key = value` lines).
    #[arg(long)]
    workload: PathBuf,
    /// Preference and targets, e.g. `balanced:time=30,cost=5`.
    #[arg(long, default_value = "balanced")]
    sla: String,
    #[arg(long, default_value = "full")]
    method: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    episodes: Option<usize>,
    /// Historical log CSV used by log-based initialization.
    #[arg(long)]
    logs: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// Workload files; may be repeated.
    #[arg(long, required = true)]
    workload: Vec<PathBuf>,
    /// Targets applied under each preference, e.g. `balanced:gpu_util=0.7`.
    #[arg(long, default_value = "balanced")]
    sla: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    logs: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    optimized: PathBuf,
    /// Workload the recommendations are computed for.
    #[arg(long)]
    workload: PathBuf,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    workload: PathBuf,
    #[arg(long, default_value_t = 1)]
    gpus: u32,
    #[arg(long, default_value_t = 1)]
    cpus: u32,
    #[command(flatten)]
    common: Common,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::SlaSpec(_) => 2,
        Error::Io(_) | Error::Csv(_) => 3,
        _ => 1,
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn load_workload(path: &Path, common: &Common) -> Result<WorkloadSpec, Error> {
    let mut w = parse_workload(&read_text(path)?)?;
    if common.noiseless {
        w.noise_sigma = 0.0;
    }
    Ok(w)
}

fn load_logs(path: Option<&Path>) -> Result<Option<HistoricalLog>, Error> {
    path.map(|p| HistoricalLog::read_csv(File::open(p)?)).transpose()
}

fn build_config(
    workload: WorkloadSpec,
    sla: SlaSpec,
    method: Method,
    seed: u64,
    common: &Common,
    episodes: Option<usize>,
    logs: Option<HistoricalLog>,
) -> Result<(RunConfig, ReportSettings), Error> {
    let mut cfg = RunConfig::new(workload, sla, method, seed);
    let settings = match &common.config {
        Some(p) => apply_run_settings(&mut cfg, &read_text(p)?)?,
        None => ReportSettings::default(),
    };
    if let Some(n) = episodes {
        cfg.episodes = n;
    }
    cfg.logs = logs;
    cfg.validate()?;
    Ok((cfg, settings))
}

fn summarize(cfg: &RunConfig) -> Result<(slamorl::orchestrator::RunOutcome, RunSummary), Error> {
    let outcome = run(cfg)?;
    let summary = RunSummary::from_outcome(&outcome, &cfg.workload, &cfg.sim, cfg.seed);
    Ok((outcome, summary))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let workload = load_workload(&args.workload, &args.common)?;
    let sla = parse_sla(&args.sla)?;
    let method: Method = args.method.parse()?;
    let logs = load_logs(args.logs.as_deref())?;
    let (cfg, settings) = build_config(workload, sla, method, args.seed, &args.common, args.episodes, logs)?;
    let (outcome, summary) = summarize(&cfg)?;
    let baseline = if method == Method::Basic {
        summary.clone()
    } else {
        let basic = RunConfig { method: Method::Basic, logs: None, ..cfg.clone() };
        summarize(&basic)?.1
    };

    fs::create_dir_all(&args.out_dir)?;
    let dir = args.out_dir.as_path();
    let mut trace = create(dir, "trace.csv")?;
    write_trace_csv(&outcome.trace, &mut trace)?;
    trace.flush()?;
    let mut history = create(dir, "history.csv")?;
    HistoricalLog::from_trace(&outcome.trace, &cfg.workload).write_csv(&mut history)?;
    history.flush()?;
    let mut pareto = create(dir, "pareto.csv")?;
    write_pareto_csv(&outcome.front, &mut pareto)?;
    pareto.flush()?;
    fs::write(dir.join("summary.txt"), summary.to_kv())?;
    fs::write(dir.join("baseline_summary.txt"), baseline.to_kv())?;
    let recs = recommend(&cfg.sim, &cfg.workload, summary.config(), settings.acceptable_slowdown);
    let report = render_report(&baseline, &summary, &recs);
    fs::write(dir.join("report.txt"), &report)?;

    println!(
        "{} ({}) on {}: {} GPU(s), {} CPU(s), {:.2} min, ${:.2}, compliance {:.1}%",
        method,
        summary.strategy,
        summary.workload,
        summary.gpus,
        summary.cpus,
        summary.total_time_s / 60.0,
        summary.total_cost_usd,
        summary.compliance_rate * 100.0
    );
    println!("artifacts written to {}", dir.display());
    Ok(())
}

const BENCH_HEADER: &str = "workload,method,preference,gpus,cpus,total_time_s,total_cost_usd,\
throughput_sps,compliance_rate,time_improvement_pct,cost_improvement_pct";

fn cmd_bench(args: &BenchArgs) -> Result<(), Error> {
    let base_sla = parse_sla(&args.sla)?;
    let logs = load_logs(args.logs.as_deref())?;
    let mut jobs = Vec::new();
    for path in &args.workload {
        let workload = load_workload(path, &args.common)?;
        for mode in PreferenceMode::ALL {
            for method in Method::ALL {
                let has_logs = logs.as_ref().is_some_and(|l| !l.for_model(&workload.name).rows.is_empty());
                if method == Method::WithTargetLogs && !has_logs {
                    continue;
                }
                let sla = SlaSpec { mode, ..base_sla.clone() };
                let (cfg, _) =
                    build_config(workload.clone(), sla, method, args.seed, &args.common, args.episodes, logs.clone())?;
                jobs.push(cfg);
            }
        }
    }
    let results: Vec<RunSummary> =
        jobs.par_iter().map(|cfg| summarize(cfg).map(|(_, s)| s)).collect::<Result<_, _>>()?;

    let mut rows = vec![BENCH_HEADER.to_string()];
    for s in &results {
        let basic = results
            .iter()
            .find(|b| b.workload == s.workload && b.strategy == s.strategy && b.method == Method::Basic.label())
            .expect("every workload and preference has a basic run");
        let gain = |b: f64, o: f64| (b - o) / b * 100.0;
        rows.push(format!(
            "{},{},{},{},{},{},{},{},{},{:.4},{:.4}",
            s.workload,
            s.method,
            s.strategy,
            s.gpus,
            s.cpus,
            s.total_time_s,
            s.total_cost_usd,
            s.throughput_sps,
            s.compliance_rate,
            gain(basic.total_time_s, s.total_time_s),
            gain(basic.total_cost_usd, s.total_cost_usd)
        ));
    }
    fs::create_dir_all(&args.out_dir)?;
    let path = args.out_dir.join("bench.csv");
    fs::write(&path, rows.join("\n") + "\n")?;
    println!("{} runs written to {}", results.len(), path.display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<(), Error> {
    let baseline = RunSummary::from_kv(&read_text(&args.baseline)?)?;
    let optimized = RunSummary::from_kv(&read_text(&args.optimized)?)?;
    let workload = load_workload(&args.workload, &args.common)?;
    let (cfg, settings) = build_config(
        workload,
        SlaSpec::new(optimized.strategy),
        Method::Basic,
        optimized.seed,
        &args.common,
        None,
        None,
    )?;
    let recs = recommend(&cfg.sim, &cfg.workload, optimized.config(), settings.acceptable_slowdown);
    let report = render_report(&baseline, &optimized, &recs);
    match &args.out {
        Some(p) => fs::write(p, report)?,
        None => print!("{report}"),
    }
    Ok(())
}

fn print_recommendation(r: &Recommendation) {
    println!(
        "{}: {} GPU(s), {} CPU(s), {:.1} GB, {:.2} min ({:+.1}%), ${:.2}",
        r.kind.title(),
        r.config.gpus,
        r.config.cpus,
        r.memory_gb,
        r.total_time_s / 60.0,
        r.time_change_pct,
        r.total_cost_usd
    );
}

fn cmd_recommend(args: &RecommendArgs) -> Result<(), Error> {
    let workload = load_workload(&args.workload, &args.common)?;
    let (cfg, settings) = build_config(
        workload,
        SlaSpec::new(PreferenceMode::Balanced),
        Method::Basic,
        0,
        &args.common,
        None,
        None,
    )?;
    let current = ResourceConfig::new(args.gpus, args.cpus, &cfg.sim.bounds).map_err(|e| Error::Config(e.to_string()))?;
    for r in recommend(&cfg.sim, &cfg.workload, current, settings.acceptable_slowdown) {
        print_recommendation(&r);
    }
    Ok(())
}

/// Parses `args` (program name first), runs the verb and returns the exit
/// code: 0 success, 1 configuration error, 2 invalid SLA, 3 I/O error.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Report(a) => cmd_report(a),
        Command::Recommend(a) => cmd_recommend(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
