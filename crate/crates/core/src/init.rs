//! Phase 1: start the online loop from something better than a cold guess.
//!
//! Three paths exist. `Skip` starts at `(1, 2)` with ε = 0.3. `FromLogs`
//! pretrains the critic on patterns extracted from historical run logs and
//! starts at the best logged allocation with ε = 0.1. `BaselineRuns` probes
//! three allocations on 20% of the data for 10% of the epochs, scales the
//! measurements to the full job, and starts at the best estimate with ε = 0.2.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;

use crate::adaptive_reward::{base_weights, reward_components, scalarize, RewardParams, RewardRefs, WeightVector};
use crate::agent::{ActorCritic, PretrainReport, PretrainRow};
use crate::cluster_sim::{mix_seed, ClusterSim, EpochMetrics, SimState, WorkloadSpec};
use crate::domain::{
    Action, ExecutionRecord, PreferenceMode, ResourceBounds, ResourceConfig, StateVector, NUM_SLA_DIMS,
};
use crate::error::{invalid, Error, Result};

/// Column order of the historical-log CSV.
pub const LOG_HEADER: [&str; 13] = [
    "model_id",
    "dataset_size",
    "epoch",
    "gpus",
    "cpus",
    "epoch_time_s",
    "hourly_cost_usd",
    "cumulative_cost_usd",
    "throughput_sps",
    "gpu_util",
    "cpu_util",
    "memory_gb_used",
    "reward",
];

pub const SKIP_CONFIG: ResourceConfig = ResourceConfig { gpus: 1, cpus: 2 };
pub const BASELINE_CONFIGS: [ResourceConfig; 3] = [
    ResourceConfig { gpus: 1, cpus: 1 },
    ResourceConfig { gpus: 2, cpus: 4 },
    ResourceConfig { gpus: 4, cpus: 8 },
];
pub const BASELINE_DATA_FRACTION: f64 = 0.2;
pub const BASELINE_EPOCH_FRACTION: f64 = 0.1;
/// Full-data / probe-data ratio applied to data-proportional quantities.
pub const BASELINE_SCALE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitMode {
    Skip,
    FromLogs,
    BaselineRuns,
}

impl InitMode {
    pub fn epsilon0(&self) -> f64 {
        match self {
            InitMode::Skip => 0.3,
            InitMode::FromLogs => 0.1,
            InitMode::BaselineRuns => 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub model_id: String,
    pub dataset_size: u64,
    pub epoch: usize,
    pub gpus: u32,
    pub cpus: u32,
    pub epoch_time_s: f64,
    pub hourly_cost_usd: f64,
    pub cumulative_cost_usd: f64,
    pub throughput_sps: f64,
    pub gpu_util: f64,
    pub cpu_util: f64,
    pub memory_gb_used: f64,
    pub reward: f64,
}

impl LogRow {
    fn numeric(&self) -> [f64; 8] {
        [
            self.epoch_time_s,
            self.hourly_cost_usd,
            self.cumulative_cost_usd,
            self.throughput_sps,
            self.gpu_util,
            self.cpu_util,
            self.memory_gb_used,
            self.reward,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.numeric().iter().all(|v| v.is_finite())
    }

    pub fn config(&self) -> ResourceConfig {
        ResourceConfig { gpus: self.gpus, cpus: self.cpus }
    }

    fn as_metrics(&self) -> EpochMetrics {
        EpochMetrics {
            epoch_time_s: self.epoch_time_s,
            throughput_sps: self.throughput_sps,
            gpu_util: self.gpu_util,
            cpu_util: self.cpu_util,
            memory_used_gb: self.memory_gb_used,
            memory_alloc_gb: f64::NAN,
            hourly_cost_usd: self.hourly_cost_usd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HistoricalLog {
    pub rows: Vec<LogRow>,
}

impl HistoricalLog {
    pub fn from_trace(trace: &[ExecutionRecord], workload: &WorkloadSpec) -> Self {
        let rows = trace
            .iter()
            .map(|r| LogRow {
                model_id: workload.name.clone(),
                dataset_size: workload.dataset_size,
                epoch: r.epoch,
                gpus: r.gpus,
                cpus: r.cpus,
                epoch_time_s: r.epoch_time_s,
                hourly_cost_usd: r.hourly_cost_usd,
                cumulative_cost_usd: r.cumulative_cost_usd,
                throughput_sps: r.throughput_sps,
                gpu_util: r.gpu_util,
                cpu_util: r.cpu_util,
                memory_gb_used: r.memory_gb_used,
                reward: r.reward,
            })
            .collect();
        Self { rows }
    }

    pub fn extend(&mut self, other: HistoricalLog) {
        self.rows.extend(other.rows);
    }

    /// Rows recorded for `model_id`.
    pub fn for_model(&self, model_id: &str) -> HistoricalLog {
        Self { rows: self.rows.iter().filter(|r| r.model_id == model_id).cloned().collect() }
    }

    pub fn read_csv(input: impl Read) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = reader.headers().map_err(|e| Error::LogRow { row: 0, message: e.to_string() })?;
        if header.iter().ne(LOG_HEADER.iter().copied()) {
            return Err(Error::LogRow {
                row: 0,
                message: format!("header must be '{}'", LOG_HEADER.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 1;
            let record = record.map_err(|e| Error::LogRow { row, message: e.to_string() })?;
            if record.len() != LOG_HEADER.len() {
                return Err(Error::LogRow {
                    row,
                    message: format!("expected {} fields, found {}", LOG_HEADER.len(), record.len()),
                });
            }
            let field = |k: usize| record.get(k).unwrap().trim();
            fn parse<T: std::str::FromStr>(raw: &str, name: &str, row: usize) -> Result<T>
            where
                T::Err: std::fmt::Display,
            {
                raw.parse::<T>()
                    .map_err(|e| Error::LogRow { row, message: format!("{name} '{raw}': {e}") })
            }
            let f = |k: usize| parse::<f64>(field(k), LOG_HEADER[k], row);
            rows.push(LogRow {
                model_id: field(0).to_string(),
                dataset_size: parse(field(1), LOG_HEADER[1], row)?,
                epoch: parse(field(2), LOG_HEADER[2], row)?,
                gpus: parse(field(3), LOG_HEADER[3], row)?,
                cpus: parse(field(4), LOG_HEADER[4], row)?,
                epoch_time_s: f(5)?,
                hourly_cost_usd: f(6)?,
                cumulative_cost_usd: f(7)?,
                throughput_sps: f(8)?,
                gpu_util: f(9)?,
                cpu_util: f(10)?,
                memory_gb_used: f(11)?,
                reward: f(12)?,
            });
        }
        Ok(Self { rows })
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LOG_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.model_id.clone(),
                r.dataset_size.to_string(),
                r.epoch.to_string(),
                r.gpus.to_string(),
                r.cpus.to_string(),
                r.epoch_time_s.to_string(),
                r.hourly_cost_usd.to_string(),
                r.cumulative_cost_usd.to_string(),
                r.throughput_sps.to_string(),
                r.gpu_util.to_string(),
                r.cpu_util.to_string(),
                r.memory_gb_used.to_string(),
                r.reward.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPatterns {
    pub rows: Vec<PretrainRow>,
    /// Log rows dropped because a numeric field was not finite.
    pub skipped: usize,
}

/// Turns each finite log row into a steady-state critic example: the state
/// is rebuilt from the row, the action is the no-op, and the target is the
/// base-weight scalarization of the reward components measured against the
/// log's first row.
pub fn extract_patterns(
    log: &HistoricalLog,
    mode: PreferenceMode,
    bounds: &ResourceBounds,
    params: &RewardParams,
) -> Result<ExtractedPatterns> {
    let finite: Vec<&LogRow> = log.rows.iter().filter(|r| r.is_finite()).collect();
    let skipped = log.rows.len() - finite.len();
    let Some(first) = finite.first() else {
        return invalid(format!("no usable log rows ({skipped} skipped as non-finite)"));
    };
    let refs = RewardRefs { throughput_sps: first.throughput_sps, hourly_cost_usd: first.hourly_cost_usd };
    let weights = base_weights(mode);
    let max_epoch = finite.iter().map(|r| r.epoch).max().unwrap_or(1).max(1) as f64;
    let max_throughput = finite.iter().map(|r| r.throughput_sps).fold(0.0, f64::max);

    let mut rows = Vec::with_capacity(finite.len());
    for r in finite {
        let components = reward_components(&r.as_metrics(), &refs, params)?;
        let state = StateVector {
            allocation: bounds.clamp(r.config()).normalized(bounds),
            utilization: [r.gpu_util.clamp(0.0, 1.0), r.cpu_util.clamp(0.0, 1.0)],
            progress: [
                (r.epoch as f64 / max_epoch).clamp(0.0, 1.0),
                if max_throughput > 0.0 { (r.throughput_sps / max_throughput).clamp(0.0, 1.0) } else { 0.0 },
            ],
            compliance: [1.0; NUM_SLA_DIMS],
            severity: [0.0; NUM_SLA_DIMS],
            preference: mode.one_hot(),
        };
        rows.push(PretrainRow {
            state: state.flatten(),
            action: Action::NOOP_INDEX,
            target: scalarize(components, &weights),
        });
    }
    Ok(ExtractedPatterns { rows, skipped })
}

/// A candidate allocation with whole-run time, cost and utilization gap
/// (`|u_gpu - target| + |u_cpu - target|`), all lower-is-better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub config: ResourceConfig,
    pub time: f64,
    pub cost: f64,
    pub util_gap: f64,
}

/// Index of the candidate with the lowest weighted sum of min-max
/// normalized (time, cost, util gap). Ties go to the earlier candidate.
pub fn best_candidate(candidates: &[Candidate], weights: &WeightVector) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    let norm = |f: fn(&Candidate) -> f64| {
        let lo = candidates.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = candidates.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        move |c: &Candidate| if hi > lo { (f(c) - lo) / (hi - lo) } else { 0.0 }
    };
    let (nt, nc, nu) = (norm(|c| c.time), norm(|c| c.cost), norm(|c| c.util_gap));
    let mut best = (0, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let score = scalarize([nt(c), nc(c), nu(c)], weights);
        if score < best.1 {
            best = (i, score);
        }
    }
    Some(best.0)
}

pub fn util_gap(gpu_util: f64, cpu_util: f64, params: &RewardParams) -> f64 {
    (gpu_util - params.gpu_util_target).abs() + (cpu_util - params.cpu_util_target).abs()
}

/// Per-allocation candidates from a log, priced for a `total_epochs` run.
pub fn log_candidates(log: &HistoricalLog, total_epochs: usize, params: &RewardParams) -> Vec<Candidate> {
    let mut groups: BTreeMap<ResourceConfig, Vec<&LogRow>> = BTreeMap::new();
    for r in log.rows.iter().filter(|r| r.is_finite()) {
        groups.entry(r.config()).or_default().push(r);
    }
    let epochs = total_epochs as f64;
    groups
        .into_iter()
        .map(|(config, rows)| {
            let n = rows.len() as f64;
            let mean = |f: fn(&LogRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
            let epoch_time = mean(|r| r.epoch_time_s);
            let epoch_cost = mean(|r| r.hourly_cost_usd * r.epoch_time_s / 3600.0);
            Candidate {
                config,
                time: epoch_time * epochs,
                cost: epoch_cost * epochs,
                util_gap: util_gap(mean(|r| r.gpu_util), mean(|r| r.cpu_util), params),
            }
        })
        .collect()
}

/// Whole-job figures extrapolated from a probe on a fraction of the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineEstimate {
    pub config: ResourceConfig,
    pub epoch_time_s: f64,
    pub throughput_sps: f64,
    pub hourly_cost_usd: f64,
    pub total_time_s: f64,
    pub total_cost_usd: f64,
    pub gpu_util: f64,
    pub cpu_util: f64,
}

impl BaselineEstimate {
    pub fn candidate(&self, params: &RewardParams) -> Candidate {
        Candidate {
            config: self.config,
            time: self.total_time_s,
            cost: self.total_cost_usd,
            util_gap: util_gap(self.gpu_util, self.cpu_util, params),
        }
    }

    pub fn refs(&self) -> RewardRefs {
        RewardRefs { throughput_sps: self.throughput_sps, hourly_cost_usd: self.hourly_cost_usd }
    }
}

/// Scales probe measurements to the full job. Epoch time is data-proportional
/// and multiplied by [`BASELINE_SCALE`]; throughput (a rate) and hourly cost
/// are carried over unchanged.
pub fn estimate_from_baseline(sample: &EpochMetrics, config: ResourceConfig, total_epochs: usize) -> BaselineEstimate {
    let epoch_time_s = BASELINE_SCALE * sample.epoch_time_s;
    let total_time_s = epoch_time_s * total_epochs as f64;
    BaselineEstimate {
        config,
        epoch_time_s,
        throughput_sps: sample.throughput_sps,
        hourly_cost_usd: sample.hourly_cost_usd,
        total_time_s,
        total_cost_usd: sample.hourly_cost_usd * total_time_s / 3600.0,
        gpu_util: sample.gpu_util,
        cpu_util: sample.cpu_util,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineProbe {
    pub estimates: Vec<BaselineEstimate>,
    /// Probe epochs executed across all allocations.
    pub epochs_run: usize,
    /// Probe samples processed across all allocations.
    pub samples_processed: u64,
    pub elapsed_s: f64,
    pub spent_usd: f64,
}

/// Runs the three probe allocations (clamped to the bounds) and scales each.
pub fn run_baseline_probes(sim: &ClusterSim, workload: &WorkloadSpec, seed: u64) -> Result<BaselineProbe> {
    let probe = workload.subsample(BASELINE_DATA_FRACTION, BASELINE_EPOCH_FRACTION);
    let mut out = BaselineProbe { estimates: Vec::new(), epochs_run: 0, samples_processed: 0, elapsed_s: 0.0, spent_usd: 0.0 };
    for (i, cfg) in BASELINE_CONFIGS.iter().enumerate() {
        let cfg = sim.bounds.clamp(*cfg);
        let mut state = SimState::new(mix_seed(seed, 0xBA5E + i as u64));
        let mut samples = Vec::with_capacity(probe.total_epochs);
        while !state.is_finished(&probe) {
            let (next, m) = sim.step_epoch(&state, cfg, &probe)?;
            samples.push(m);
            state = next;
        }
        let n = samples.len() as f64;
        let mean = |f: fn(&EpochMetrics) -> f64| samples.iter().map(f).sum::<f64>() / n;
        let epoch_time_s = mean(|m| m.epoch_time_s);
        let averaged = EpochMetrics {
            epoch_time_s,
            throughput_sps: probe.dataset_size as f64 / epoch_time_s,
            gpu_util: mean(|m| m.gpu_util),
            cpu_util: mean(|m| m.cpu_util),
            memory_used_gb: mean(|m| m.memory_used_gb),
            memory_alloc_gb: samples[0].memory_alloc_gb,
            hourly_cost_usd: samples[0].hourly_cost_usd,
        };
        out.estimates.push(estimate_from_baseline(&averaged, cfg, workload.total_epochs));
        out.epochs_run += samples.len();
        out.samples_processed += probe.dataset_size * samples.len() as u64;
        out.elapsed_s += state.elapsed_s;
        out.spent_usd += state.spent_usd;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitParams {
    pub pretrain_epochs: usize,
    pub pretrain_batch: usize,
}

impl Default for InitParams {
    fn default() -> Self {
        Self { pretrain_epochs: 100, pretrain_batch: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome {
    pub mode: InitMode,
    pub initial_config: ResourceConfig,
    pub epsilon0: f64,
    pub pretrained: bool,
    pub pretrain: Option<PretrainReport>,
    pub skipped_log_rows: usize,
    pub baseline: Option<BaselineProbe>,
    /// Reward references known before the online phase starts.
    pub refs: Option<RewardRefs>,
}

impl InitOutcome {
    pub fn baseline_estimates(&self) -> BTreeMap<ResourceConfig, BaselineEstimate> {
        self.baseline.iter().flat_map(|b| b.estimates.iter().map(|e| (e.config, *e))).collect()
    }
}

pub struct InitContext<'a> {
    pub sim: &'a ClusterSim,
    pub workload: &'a WorkloadSpec,
    pub mode: PreferenceMode,
    pub reward: &'a RewardParams,
    pub params: InitParams,
    pub seed: u64,
}

fn usable_log<'a>(logs: Option<&'a HistoricalLog>, workload: &WorkloadSpec) -> Result<HistoricalLog> {
    let Some(logs) = logs else {
        return invalid("FromLogs initialization needs a historical log");
    };
    if logs.rows.is_empty() {
        return invalid("historical log is empty");
    }
    let matching = logs.for_model(&workload.name);
    if matching.rows.is_empty() {
        return invalid(format!("historical log has no rows for model '{}'", workload.name));
    }
    Ok(matching)
}

fn pretrain_from_log(
    log: &HistoricalLog,
    ctx: &InitContext<'_>,
    agent: &mut ActorCritic,
    rng: &mut impl Rng,
) -> Result<(PretrainReport, usize)> {
    let patterns = extract_patterns(log, ctx.mode, &ctx.sim.bounds, ctx.reward)?;
    let report = agent.pretrain_critic(&patterns.rows, ctx.params.pretrain_epochs, ctx.params.pretrain_batch, rng)?;
    Ok((report, patterns.skipped))
}

/// The reference pattern extraction scored the log against, so online
/// rewards stay on the scale the critic was pretrained on.
fn log_refs(log: &HistoricalLog) -> Option<RewardRefs> {
    log.rows
        .iter()
        .find(|r| r.is_finite())
        .map(|r| RewardRefs { throughput_sps: r.throughput_sps, hourly_cost_usd: r.hourly_cost_usd })
}

/// Runs one Phase-1 path, updating `agent` in place when it pretrains.
pub fn initialize(
    mode: InitMode,
    logs: Option<&HistoricalLog>,
    ctx: &InitContext<'_>,
    agent: &mut ActorCritic,
    rng: &mut impl Rng,
) -> Result<InitOutcome> {
    ctx.workload.validate()?;
    let mut outcome = InitOutcome {
        mode,
        initial_config: ctx.sim.bounds.clamp(SKIP_CONFIG),
        epsilon0: mode.epsilon0(),
        pretrained: false,
        pretrain: None,
        skipped_log_rows: 0,
        baseline: None,
        refs: None,
    };
    let weights = base_weights(ctx.mode);
    match mode {
        InitMode::Skip => {}
        InitMode::FromLogs => {
            let log = usable_log(logs, ctx.workload)?;
            let (report, skipped) = pretrain_from_log(&log, ctx, agent, rng)?;
            let candidates = log_candidates(&log, ctx.workload.total_epochs, ctx.reward);
            let best = best_candidate(&candidates, &weights).expect("log has finite rows");
            outcome.initial_config = ctx.sim.bounds.clamp(candidates[best].config);
            outcome.refs = log_refs(&log);
            outcome.pretrained = true;
            outcome.pretrain = Some(report);
            outcome.skipped_log_rows = skipped;
        }
        InitMode::BaselineRuns => {
            let probe = run_baseline_probes(ctx.sim, ctx.workload, ctx.seed)?;
            let candidates: Vec<Candidate> = probe.estimates.iter().map(|e| e.candidate(ctx.reward)).collect();
            let best = best_candidate(&candidates, &weights).expect("three probes");
            outcome.initial_config = probe.estimates[best].config;
            outcome.refs = Some(probe.estimates[best].refs());
            outcome.baseline = Some(probe);
        }
    }
    Ok(outcome)
}

/// Probes and logs together: baseline estimates and logged allocations
/// compete for the starting point, and the critic is pretrained when a log
/// for this workload exists (ε = 0.1 then, 0.2 otherwise).
pub fn initialize_combined(
    logs: Option<&HistoricalLog>,
    ctx: &InitContext<'_>,
    agent: &mut ActorCritic,
    rng: &mut impl Rng,
) -> Result<InitOutcome> {
    let mut outcome = initialize(InitMode::BaselineRuns, None, ctx, agent, rng)?;
    let log = match logs {
        Some(l) if !l.for_model(&ctx.workload.name).rows.is_empty() => l.for_model(&ctx.workload.name),
        _ => return Ok(outcome),
    };
    let (report, skipped) = pretrain_from_log(&log, ctx, agent, rng)?;
    let probe = outcome.baseline.as_ref().expect("baseline path ran");
    let mut candidates: Vec<Candidate> = probe.estimates.iter().map(|e| e.candidate(ctx.reward)).collect();
    let from_probe = candidates.len();
    candidates.extend(log_candidates(&log, ctx.workload.total_epochs, ctx.reward));
    let best = best_candidate(&candidates, &base_weights(ctx.mode)).expect("non-empty");
    if best >= from_probe {
        outcome.initial_config = ctx.sim.bounds.clamp(candidates[best].config);
    }
    outcome.refs = log_refs(&log);
    outcome.mode = InitMode::FromLogs;
    outcome.epsilon0 = InitMode::FromLogs.epsilon0();
    outcome.pretrained = true;
    outcome.pretrain = Some(report);
    outcome.skipped_log_rows = skipped;
    Ok(outcome)
}
