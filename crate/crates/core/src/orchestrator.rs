//! Phase 1 followed by the episodic online loop, plus the five comparison
//! methods, Pareto extraction and final selection.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adaptive_reward::{adapt_weights, base_weights, reward, RewardParams, RewardRefs, WeightVector};
use crate::agent::{ActorCritic, AgentConfig, Learner, Transition};
use crate::cluster_sim::{mix_seed, ClusterSim, EpochMetrics, SimState, WorkloadSpec};
use crate::domain::{
    apply_action, Action, ComplianceVector, ExecutionRecord, PreferenceMode, ResourceConfig, SlaDimension, SlaSpec,
    StateVector, NUM_ACTIONS,
};
use crate::error::{invalid, Error, Result};
use crate::init::{
    best_candidate, initialize, initialize_combined, util_gap, Candidate, HistoricalLog, InitContext, InitMode,
    InitOutcome, InitParams, SKIP_CONFIG,
};
use crate::sla_monitor::{change_detected, evaluate_compliance, project_totals, SlaDefaults, SlaTargets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Fixed one-GPU allocation, no optimization.
    Basic,
    /// Best grid allocation for the noiseless models, held all run.
    StaticRecom,
    /// Greedy one-step lookahead on the noiseless models; no Phase 1, no learning.
    Lite,
    /// Actor-critic after the baseline-run initialization.
    BaseRuns,
    /// Actor-critic after initialization from logs of earlier runs.
    WithTargetLogs,
    /// Actor-critic after baseline runs, plus log pretraining when logs exist.
    Full,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Basic, Method::StaticRecom, Method::Lite, Method::BaseRuns, Method::WithTargetLogs, Method::Full];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Basic => "basic",
            Method::StaticRecom => "static_recom",
            Method::Lite => "lite",
            Method::BaseRuns => "base_runs",
            Method::WithTargetLogs => "with_target_logs",
            Method::Full => "full",
        }
    }

    pub fn learns(&self) -> bool {
        matches!(self, Method::BaseRuns | Method::WithTargetLogs | Method::Full)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.label() == norm)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub workload: WorkloadSpec,
    pub sla: SlaSpec,
    pub method: Method,
    pub episodes: usize,
    pub tau_change: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
    pub sim: ClusterSim,
    pub reward: RewardParams,
    pub sla_defaults: SlaDefaults,
    pub agent: AgentConfig,
    pub init: InitParams,
    /// CPU cores the Basic method gets with its single GPU.
    pub basic_cpus: u32,
    /// Replaces the method's own Phase-1 path (actor-critic methods only).
    pub init_override: Option<InitMode>,
    /// When false, the base weights are used throughout.
    pub adapt_weights: bool,
    pub logs: Option<HistoricalLog>,
    /// Pins the reward reference instead of taking it from Phase 1 or the first epoch.
    pub reward_refs: Option<RewardRefs>,
}

impl RunConfig {
    pub fn new(workload: WorkloadSpec, sla: SlaSpec, method: Method, seed: u64) -> Self {
        let sim = ClusterSim::default();
        Self {
            workload,
            sla,
            method,
            episodes: 10,
            tau_change: 0.1,
            alpha: 0.5,
            gamma: 0.95,
            seed,
            basic_cpus: (sim.bounds.max_cpus / sim.bounds.max_gpus).max(1),
            sim,
            reward: RewardParams::default(),
            sla_defaults: SlaDefaults::default(),
            agent: AgentConfig::default(),
            init: InitParams::default(),
            init_override: None,
            adapt_weights: true,
            logs: None,
            reward_refs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        self.sla.validate()?;
        if self.episodes == 0 {
            return invalid("episodes must be at least 1");
        }
        if self.tau_change.is_nan() || self.tau_change < 0.0 {
            return invalid(format!("tau_change must be non-negative, got {}", self.tau_change));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return invalid(format!("alpha must be finite and non-negative, got {}", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return invalid(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if self.method == Method::WithTargetLogs && self.logs.is_none() && self.init_override.is_none() {
            return Err(Error::Config("method with_target_logs needs a historical log".into()));
        }
        Ok(())
    }

    pub fn basic_config(&self) -> ResourceConfig {
        self.sim.bounds.clamp(ResourceConfig { gpus: 1, cpus: self.basic_cpus })
    }

    fn episodes_for_method(&self) -> usize {
        match self.method {
            Method::Basic | Method::StaticRecom => 1,
            _ => self.episodes,
        }
    }
}

/// One episode's outcome in (time, cost) space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoPoint {
    pub episode: usize,
    pub total_time_s: f64,
    pub total_cost_usd: f64,
    pub final_config: ResourceConfig,
    /// The episode ended with every SLA dimension met.
    pub sla_compliant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub total_time_s: f64,
    pub total_cost_usd: f64,
    pub final_config: ResourceConfig,
    pub final_compliance: ComplianceVector,
    /// Fraction of the episode's epochs with every dimension met.
    pub compliance_rate: f64,
    /// Mean reward over the epochs after the observation epoch.
    pub mean_reward: f64,
    pub mean_throughput_sps: f64,
    pub decisions: usize,
}

impl EpisodeSummary {
    pub fn point(&self) -> ParetoPoint {
        ParetoPoint {
            episode: self.episode,
            total_time_s: self.total_time_s,
            total_cost_usd: self.total_cost_usd,
            final_config: self.final_config,
            sla_compliant: self.final_compliance.is_fully_met(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub method: Method,
    pub mode: PreferenceMode,
    pub initial_config: ResourceConfig,
    pub init: Option<InitOutcome>,
    pub targets: SlaTargets,
    pub trace: Vec<ExecutionRecord>,
    pub episodes: Vec<EpisodeSummary>,
    pub front: Vec<ParetoPoint>,
    pub selected: ParetoPoint,
}

impl RunOutcome {
    pub fn history(&self) -> Vec<ParetoPoint> {
        self.episodes.iter().map(EpisodeSummary::point).collect()
    }

    pub fn selected_episode(&self) -> &EpisodeSummary {
        &self.episodes[self.selected.episode]
    }

    pub fn episode_rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.mean_reward).collect()
    }

    /// Fraction of all epochs in the run with every dimension met.
    pub fn compliance_rate(&self) -> f64 {
        let met = self.trace.iter().filter(|r| r.met.iter().all(|m| *m)).count();
        met as f64 / self.trace.len().max(1) as f64
    }
}

/// Indices of the points not dominated under minimization of both
/// coordinates, ordered by ascending first coordinate (then second).
/// Identical points do not dominate each other and are all kept.
pub fn pareto_indices(points: &[(f64, f64)]) -> Result<Vec<usize>> {
    if points.is_empty() {
        return invalid("Pareto front of an empty history");
    }
    if points.iter().any(|(t, c)| t.is_nan() || c.is_nan()) {
        return invalid("Pareto points must not be NaN");
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].partial_cmp(&points[b]).expect("no NaN"));
    let mut keep = Vec::new();
    // Lowest cost among points with strictly smaller time.
    let mut min_strict = f64::INFINITY;
    let mut group_time = f64::NAN;
    let mut group_min = f64::INFINITY;
    let mut group_pending = f64::INFINITY;
    for &i in &order {
        let (t, c) = points[i];
        if t != group_time {
            min_strict = min_strict.min(group_pending);
            group_time = t;
            group_min = c;
            group_pending = c;
        }
        group_pending = group_pending.min(c);
        if min_strict > c && group_min >= c {
            keep.push(i);
        }
    }
    Ok(keep)
}

pub fn pareto_front(history: &[ParetoPoint]) -> Result<Vec<ParetoPoint>> {
    let coords: Vec<(f64, f64)> = history.iter().map(|p| (p.total_time_s, p.total_cost_usd)).collect();
    Ok(pareto_indices(&coords)?.into_iter().map(|i| history[i]).collect())
}

/// Picks the final point: restricted to SLA-compliant points when any
/// exist, then min time, min cost, or (Balanced) min distance to the ideal
/// point after min-max normalization. Ties go to the earlier point.
pub fn select_configuration(front: &[ParetoPoint], mode: PreferenceMode) -> Result<ParetoPoint> {
    if front.is_empty() {
        return invalid("cannot select from an empty front");
    }
    let compliant: Vec<ParetoPoint> = front.iter().filter(|p| p.sla_compliant).copied().collect();
    let pool = if compliant.is_empty() { front.to_vec() } else { compliant };
    let score: Box<dyn Fn(&ParetoPoint) -> f64> = match mode {
        PreferenceMode::TimePriority => Box::new(|p| p.total_time_s),
        PreferenceMode::CostPriority => Box::new(|p| p.total_cost_usd),
        PreferenceMode::Balanced => {
            let range = |f: fn(&ParetoPoint) -> f64| {
                let lo = pool.iter().map(f).fold(f64::INFINITY, f64::min);
                let hi = pool.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            };
            let (t0, t1) = range(|p| p.total_time_s);
            let (c0, c1) = range(|p| p.total_cost_usd);
            let norm = |v: f64, lo: f64, hi: f64| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            Box::new(move |p| norm(p.total_time_s, t0, t1).hypot(norm(p.total_cost_usd, c0, c1)))
        }
    };
    let mut best = pool[0];
    for p in &pool[1..] {
        if score(p) < score(&best) {
            best = *p;
        }
    }
    Ok(best)
}

/// Grid allocation with the best base-weight score over min-max normalized
/// noiseless whole-run time, cost and utilization gap.
pub fn static_recommendation(
    sim: &ClusterSim,
    workload: &WorkloadSpec,
    mode: PreferenceMode,
    params: &RewardParams,
) -> ResourceConfig {
    let epochs = workload.total_epochs as f64;
    let candidates: Vec<Candidate> = sim
        .bounds
        .grid()
        .into_iter()
        .map(|cfg| {
            let m = sim.expected_metrics(cfg, workload);
            Candidate {
                config: cfg,
                time: m.epoch_time_s * epochs,
                cost: sim.epoch_cost(cfg, workload) * epochs,
                util_gap: util_gap(m.gpu_util, m.cpu_util, params),
            }
        })
        .collect();
    candidates[best_candidate(&candidates, &base_weights(mode)).expect("non-empty grid")].config
}

/// How the allocation is chosen when the change detector fires.
enum Policy {
    Fixed,
    Greedy,
    Learned(Box<Learner>),
}

struct Episode<'a> {
    cfg: &'a RunConfig,
    targets: SlaTargets,
    refs: Option<RewardRefs>,
    cumulative_cost: f64,
    step_index: usize,
}

impl Episode<'_> {
    fn weights(&self, compliance: &ComplianceVector) -> WeightVector {
        let base = base_weights(self.cfg.sla.mode);
        if self.cfg.adapt_weights {
            adapt_weights(base, compliance, self.cfg.alpha, &self.cfg.reward.objectives)
        } else {
            base
        }
    }

    fn compliance(&self, sim_state: &SimState, alloc: ResourceConfig, m: &EpochMetrics) -> ComplianceVector {
        let (time, cost) = project_totals(&self.cfg.sim, sim_state, alloc, &self.cfg.workload);
        evaluate_compliance(m, time, cost, &self.targets)
    }

    fn observe(
        &self,
        alloc: ResourceConfig,
        m: &EpochMetrics,
        sim_state: &SimState,
        compliance: &ComplianceVector,
    ) -> StateVector {
        let cfg = self.cfg;
        let max_thr = cfg.sim.max_throughput(&cfg.workload);
        StateVector {
            allocation: alloc.normalized(&cfg.sim.bounds),
            utilization: [m.gpu_util, m.cpu_util],
            progress: [
                sim_state.epoch_completed as f64 / cfg.workload.total_epochs as f64,
                (m.throughput_sps / max_thr).clamp(0.0, 1.0),
            ],
            compliance: compliance.met.map(|met| if met { 1.0 } else { 0.0 }),
            severity: compliance.severity,
            preference: cfg.sla.mode.one_hot(),
        }
    }

    /// One-step lookahead on the noiseless models under the current weights.
    fn greedy_action(&self, sim_state: &SimState, alloc: ResourceConfig, weights: &WeightVector) -> Result<usize> {
        let cfg = self.cfg;
        let refs = self.refs.expect("refs set after the observation epoch");
        let mut best = (Action::NOOP_INDEX, f64::NEG_INFINITY);
        // The no-op is scored first so it wins ties.
        let order = std::iter::once(Action::NOOP_INDEX).chain((0..NUM_ACTIONS).filter(|i| *i != Action::NOOP_INDEX));
        for index in order {
            let next = apply_action(alloc, Action::from_index(index)?, &cfg.sim.bounds);
            let m = cfg.sim.expected_metrics(next, &cfg.workload);
            let compliance = self.compliance(sim_state, next, &m);
            let r = reward(&m, weights, &compliance, &refs, &cfg.reward)?.total;
            if r > best.1 {
                best = (index, r);
            }
        }
        Ok(best.0)
    }

    fn record(
        &mut self,
        episode: usize,
        sim_state: &SimState,
        alloc: ResourceConfig,
        m: &EpochMetrics,
        reward: f64,
        weights: &WeightVector,
        compliance: &ComplianceVector,
        action: usize,
        decision: bool,
    ) -> ExecutionRecord {
        self.cumulative_cost += m.hourly_cost_usd * m.epoch_time_s / 3600.0;
        let rec = ExecutionRecord {
            episode,
            step_index: self.step_index,
            epoch: sim_state.epoch_completed,
            gpus: alloc.gpus,
            cpus: alloc.cpus,
            epoch_time_s: m.epoch_time_s,
            hourly_cost_usd: m.hourly_cost_usd,
            cumulative_cost_usd: self.cumulative_cost,
            throughput_sps: m.throughput_sps,
            gpu_util: m.gpu_util,
            cpu_util: m.cpu_util,
            memory_gb_used: m.memory_used_gb,
            reward,
            weights: weights.as_array(),
            met: compliance.met,
            severity: compliance.severity,
            action_index: action,
            decision,
        };
        self.step_index += 1;
        rec
    }

    fn run(
        &mut self,
        episode: usize,
        start: ResourceConfig,
        policy: &mut Policy,
        rng: &mut ChaCha8Rng,
        trace: &mut Vec<ExecutionRecord>,
    ) -> Result<EpisodeSummary> {
        let cfg = self.cfg;
        let (sim, workload) = (&cfg.sim, &cfg.workload);
        let first_row = trace.len();
        let mut alloc = start;

        // Observation epoch: establishes the reward reference if none is known.
        let (mut sim_state, metrics) = sim.step_epoch(&SimState::new(mix_seed(cfg.seed, episode as u64)), alloc, workload)?;
        let refs = *self.refs.get_or_insert_with(|| RewardRefs::from_metrics(&metrics));
        let mut compliance = self.compliance(&sim_state, alloc, &metrics);
        let weights = self.weights(&compliance);
        let r0 = reward(&metrics, &weights, &compliance, &refs, &cfg.reward)?.total;
        let rec = self.record(episode, &sim_state, alloc, &metrics, r0, &weights, &compliance, Action::NOOP_INDEX, false);
        trace.push(rec);

        let mut state = self.observe(alloc, &metrics, &sim_state, &compliance);
        let mut prev: Option<StateVector> = None;
        let mut decisions = 0;
        while !sim_state.is_finished(workload) {
            // With no previous observation every coordinate counts as changed.
            let fires = match &prev {
                Some(p) => change_detected(p, &state, cfg.tau_change, &compliance),
                None => f64::INFINITY > cfg.tau_change || compliance.any_violated(),
            };
            let weights = self.weights(&compliance);
            let action = match (fires, &*policy) {
                (false, _) | (true, Policy::Fixed) => Action::NOOP_INDEX,
                (true, Policy::Greedy) => self.greedy_action(&sim_state, alloc, &weights)?,
                (true, Policy::Learned(l)) => l.act(&state.flatten(), rng),
            };
            let decided = fires && !matches!(policy, Policy::Fixed);
            alloc = apply_action(alloc, Action::from_index(action)?, &sim.bounds);
            let (next_sim, next_metrics) = sim.step_epoch(&sim_state, alloc, workload)?;
            let next_compliance = self.compliance(&next_sim, alloc, &next_metrics);
            let r = reward(&next_metrics, &weights, &next_compliance, &refs, &cfg.reward)?.total;
            let next_state = self.observe(alloc, &next_metrics, &next_sim, &next_compliance);
            if decided {
                decisions += 1;
                if let Policy::Learned(learner) = policy {
                    let t = Transition::new(
                        state.flatten(),
                        action,
                        r,
                        next_state.flatten(),
                        next_sim.is_finished(workload),
                    )?;
                    learner.observe(t, rng)?;
                }
            }
            let rec = self.record(episode, &next_sim, alloc, &next_metrics, r, &weights, &next_compliance, action, decided);
            trace.push(rec);
            prev = Some(state);
            state = next_state;
            sim_state = next_sim;
            compliance = next_compliance;
        }

        let rows = &trace[first_row..];
        let later = &rows[1..];
        let mean = |f: fn(&ExecutionRecord) -> f64, rs: &[ExecutionRecord]| {
            if rs.is_empty() {
                0.0
            } else {
                rs.iter().map(f).sum::<f64>() / rs.len() as f64
            }
        };
        Ok(EpisodeSummary {
            episode,
            total_time_s: sim_state.elapsed_s,
            total_cost_usd: sim_state.spent_usd,
            final_config: alloc,
            final_compliance: compliance,
            compliance_rate: rows.iter().filter(|r| r.met.iter().all(|m| *m)).count() as f64 / rows.len() as f64,
            mean_reward: if later.is_empty() { rows[0].reward } else { mean(|r| r.reward, later) },
            mean_throughput_sps: workload.dataset_size as f64 * rows.len() as f64 / sim_state.elapsed_s,
            decisions,
        })
    }
}

/// Executes `cfg.method` end to end. Deterministic for a fixed config.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mode = cfg.sla.mode;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5EED_A6E7));
    let basic = cfg.basic_config();
    let baseline_throughput = cfg.sim.expected_metrics(basic, &cfg.workload).throughput_sps;
    let targets = SlaTargets::resolve(&cfg.sla, baseline_throughput, &cfg.sla_defaults);

    let mut init_outcome = None;
    let (start, mut policy) = match cfg.method {
        Method::Basic => (basic, Policy::Fixed),
        Method::StaticRecom => (static_recommendation(&cfg.sim, &cfg.workload, mode, &cfg.reward), Policy::Fixed),
        Method::Lite => (cfg.sim.bounds.clamp(SKIP_CONFIG), Policy::Greedy),
        Method::BaseRuns | Method::WithTargetLogs | Method::Full => {
            let mut agent_cfg = cfg.agent;
            agent_cfg.gamma = cfg.gamma;
            let mut agent = ActorCritic::new(agent_cfg, &mut rng);
            let ctx = InitContext {
                sim: &cfg.sim,
                workload: &cfg.workload,
                mode,
                reward: &cfg.reward,
                params: cfg.init,
                seed: cfg.seed,
            };
            let outcome = match (cfg.init_override, cfg.method) {
                (Some(m), _) => initialize(m, cfg.logs.as_ref(), &ctx, &mut agent, &mut rng)?,
                (None, Method::BaseRuns) => initialize(InitMode::BaselineRuns, None, &ctx, &mut agent, &mut rng)?,
                (None, Method::WithTargetLogs) => {
                    initialize(InitMode::FromLogs, cfg.logs.as_ref(), &ctx, &mut agent, &mut rng)?
                }
                (None, _) => initialize_combined(cfg.logs.as_ref(), &ctx, &mut agent, &mut rng)?,
            };
            let start = outcome.initial_config;
            let learner = Learner::new(agent, outcome.epsilon0);
            init_outcome = Some(outcome);
            (start, Policy::Learned(Box::new(learner)))
        }
    };

    let mut ep = Episode {
        cfg,
        targets,
        refs: cfg.reward_refs.or(init_outcome.as_ref().and_then(|o| o.refs)),
        cumulative_cost: 0.0,
        step_index: 0,
    };
    let mut trace = Vec::new();
    let mut episodes = Vec::new();
    for e in 0..cfg.episodes_for_method() {
        episodes.push(ep.run(e, start, &mut policy, &mut rng, &mut trace)?);
    }
    let history: Vec<ParetoPoint> = episodes.iter().map(EpisodeSummary::point).collect();
    let front = pareto_front(&history)?;
    let selected = select_configuration(&front, mode)?;
    Ok(RunOutcome {
        method: cfg.method,
        mode,
        initial_config: start,
        init: init_outcome,
        targets,
        trace,
        episodes,
        front,
        selected,
    })
}

pub const TRACE_HEADER: &str = "episode,step,epoch,gpus,cpus,epoch_time_s,hourly_cost_usd,cumulative_cost_usd,\
throughput_sps,gpu_util,cpu_util,memory_gb_used,reward,w_time,w_cost,w_util,\
met_time,met_cost,met_throughput,met_memory,met_gpu_util,met_cpu_util,\
sev_time,sev_cost,sev_throughput,sev_memory,sev_gpu_util,sev_cpu_util,action,decision";

pub fn write_trace_csv(trace: &[ExecutionRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in trace {
        let mut fields = vec![
            r.episode.to_string(),
            r.step_index.to_string(),
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
        ];
        fields.extend(r.weights.iter().map(f64::to_string));
        fields.extend(r.met.iter().map(|m| u8::from(*m).to_string()));
        fields.extend(r.severity.iter().map(f64::to_string));
        fields.push(r.action_index.to_string());
        fields.push(u8::from(r.decision).to_string());
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_pareto_csv(front: &[ParetoPoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "total_time_s,total_cost_usd,sla_compliant")?;
    for p in front {
        writeln!(out, "{},{},{}", p.total_time_s, p.total_cost_usd, p.sla_compliant)?;
    }
    Ok(())
}

/// Labels of the dimensions `compliance` marks as violated.
pub fn violated_dimensions(compliance: &ComplianceVector) -> Vec<&'static str> {
    SlaDimension::ALL.iter().filter(|d| !compliance.met[d.index()]).map(|d| d.key()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(t: f64, c: f64, ok: bool) -> ParetoPoint {
        ParetoPoint {
            episode: 0,
            total_time_s: t,
            total_cost_usd: c,
            final_config: SKIP_CONFIG,
            sla_compliant: ok,
        }
    }

    fn coords(front: &[ParetoPoint]) -> Vec<(f64, f64)> {
        front.iter().map(|p| (p.total_time_s, p.total_cost_usd)).collect()
    }

    pub(crate) fn workload(epochs: usize, noise: f64) -> WorkloadSpec {
        WorkloadSpec {
            name: "test-job".into(),
            t_base_s: 900.0,
            total_epochs: epochs,
            dataset_size: 40_000,
            gpu_intensity: 0.9,
            cpu_intensity: 0.9,
            model_mem_gb: 3.0,
            per_sample_mem_mb: 8.0,
            noise_sigma: noise,
        }
    }

    #[test]
    fn pareto_examples() {
        let three = [point(10.0, 5.0, true), point(8.0, 7.0, true), point(12.0, 4.0, true)];
        assert_eq!(coords(&pareto_front(&three).unwrap()), vec![(8.0, 7.0), (10.0, 5.0), (12.0, 4.0)]);
        let two = [point(10.0, 5.0, true), point(11.0, 6.0, true)];
        assert_eq!(coords(&pareto_front(&two).unwrap()), vec![(10.0, 5.0)]);
        assert_eq!(coords(&pareto_front(&[point(3.0, 3.0, false)]).unwrap()), vec![(3.0, 3.0)]);
        assert!(pareto_front(&[]).is_err());
    }

    #[test]
    fn pareto_ties_and_duplicates() {
        let pts = [(1.0, 2.0), (1.0, 3.0), (1.0, 2.0), (2.0, 2.0), (0.5, 9.0)];
        assert_eq!(pareto_indices(&pts).unwrap(), vec![4, 0, 2]);
        assert!(pareto_indices(&[(f64::NAN, 1.0)]).is_err());
    }

    #[test]
    fn selection_examples() {
        let front = [point(8.0, 7.0, true), point(10.0, 5.0, true)];
        assert_eq!(coords(&[select_configuration(&front, PreferenceMode::TimePriority).unwrap()]), vec![(8.0, 7.0)]);
        assert_eq!(coords(&[select_configuration(&front, PreferenceMode::CostPriority).unwrap()]), vec![(10.0, 5.0)]);
        let three = [point(8.0, 7.0, true), point(10.0, 5.0, true), point(9.0, 6.0, true)];
        assert_eq!(coords(&[select_configuration(&three, PreferenceMode::Balanced).unwrap()]), vec![(9.0, 6.0)]);
    }

    #[test]
    fn selection_prefers_compliant_points() {
        let front = [point(8.0, 7.0, false), point(10.0, 5.0, true)];
        assert_eq!(select_configuration(&front, PreferenceMode::TimePriority).unwrap().total_time_s, 10.0);
        let none = [point(8.0, 7.0, false), point(10.0, 5.0, false)];
        assert_eq!(select_configuration(&none, PreferenceMode::TimePriority).unwrap().total_time_s, 8.0);
        assert!(select_configuration(&[], PreferenceMode::Balanced).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.label().parse::<Method>().unwrap(), m);
        }
        assert_eq!("Static-Recom".parse::<Method>().unwrap(), Method::StaticRecom);
        assert!("best".parse::<Method>().is_err());
    }

    #[test]
    fn basic_is_fixed_single_episode() {
        let cfg = RunConfig::new(workload(6, 0.02), SlaSpec::new(PreferenceMode::Balanced), Method::Basic, 3);
        let out = run(&cfg).unwrap();
        assert_eq!(out.episodes.len(), 1);
        assert_eq!(out.trace.len(), 6);
        assert!(out.trace.iter().all(|r| (r.gpus, r.cpus) == (1, 10) && !r.decision));
        assert_eq!(out.selected.final_config, ResourceConfig { gpus: 1, cpus: 10 });
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = RunConfig {
            episodes: 3,
            ..RunConfig::new(workload(8, 0.05), SlaSpec::new(PreferenceMode::TimePriority), Method::Full, 42)
        };
        let render = |o: &RunOutcome| {
            let mut buf = Vec::new();
            write_trace_csv(&o.trace, &mut buf).unwrap();
            buf
        };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(render(&a), render(&b));
        let c = run(&RunConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(render(&a), render(&c));
    }

    #[test]
    fn infinite_tau_without_violations_takes_no_action() {
        let mut sla = SlaSpec::new(PreferenceMode::TimePriority);
        sla.gpu_util_target = Some(0.01);
        sla.cpu_util_target = Some(0.01);
        sla.throughput_target_sps = Some(1.0);
        let cfg = RunConfig {
            tau_change: f64::INFINITY,
            episodes: 2,
            ..RunConfig::new(workload(10, 0.05), sla, Method::Full, 1)
        };
        let out = run(&cfg).unwrap();
        let start = out.initial_config;
        assert!(out.trace.iter().all(|r| !r.decision && (r.gpus, r.cpus) == (start.gpus, start.cpus)));
    }

    #[test]
    fn violation_forces_a_decision_despite_infinite_tau() {
        let mut sla = SlaSpec::new(PreferenceMode::CostPriority);
        // Unreachable GPU-utilization floor: violated at every epoch.
        sla.gpu_util_target = Some(1.0);
        let cfg = RunConfig {
            tau_change: f64::INFINITY,
            episodes: 1,
            ..RunConfig::new(workload(5, 0.0), sla, Method::Lite, 1)
        };
        let out = run(&cfg).unwrap();
        assert!(out.trace[1..].iter().all(|r| r.decision));
    }

    #[test]
    fn fixed_policy_trace_equals_plain_simulation() {
        let w = workload(7, 0.05);
        let cfg = RunConfig::new(w.clone(), SlaSpec::new(PreferenceMode::Balanced), Method::Basic, 9);
        let out = run(&cfg).unwrap();
        let sim = ClusterSim::default();
        let mut state = SimState::new(mix_seed(9, 0));
        for rec in &out.trace {
            let (next, m) = sim.step_epoch(&state, cfg.basic_config(), &w).unwrap();
            assert_eq!(rec.epoch_time_s, m.epoch_time_s);
            assert_eq!(rec.gpu_util, m.gpu_util);
            assert_eq!(rec.action_index, Action::NOOP_INDEX);
            state = next;
        }
        assert_eq!(out.episodes[0].total_time_s, state.elapsed_s);
    }

    #[test]
    fn cumulative_cost_is_monotone_across_episodes() {
        let cfg = RunConfig {
            episodes: 3,
            ..RunConfig::new(workload(6, 0.05), SlaSpec::new(PreferenceMode::Balanced), Method::Lite, 2)
        };
        let out = run(&cfg).unwrap();
        assert_eq!(out.trace.len(), 18);
        assert!(out.trace.windows(2).all(|w| w[1].cumulative_cost_usd > w[0].cumulative_cost_usd));
        let total: f64 = out.episodes.iter().map(|e| e.total_cost_usd).sum();
        assert!((out.trace.last().unwrap().cumulative_cost_usd - total).abs() < 1e-9);
    }

    #[test]
    fn static_recommendation_is_grid_argmin() {
        let sim = ClusterSim::default();
        let w = workload(10, 0.0);
        let time = static_recommendation(&sim, &w, PreferenceMode::TimePriority, &RewardParams::default());
        let cost = static_recommendation(&sim, &w, PreferenceMode::CostPriority, &RewardParams::default());
        assert!(sim.epoch_time(time, &w) <= sim.epoch_time(cost, &w));
        assert!(sim.epoch_cost(cost, &w) <= sim.epoch_cost(time, &w));
    }

    #[test]
    fn with_target_logs_requires_logs() {
        let cfg = RunConfig::new(workload(5, 0.0), SlaSpec::new(PreferenceMode::Balanced), Method::WithTargetLogs, 1);
        assert!(matches!(run(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn logs_from_one_run_feed_the_next() {
        let w = workload(6, 0.02);
        let first = run(&RunConfig {
            episodes: 2,
            ..RunConfig::new(w.clone(), SlaSpec::new(PreferenceMode::Balanced), Method::Lite, 5)
        })
        .unwrap();
        let logs = HistoricalLog::from_trace(&first.trace, &w);
        let second = run(&RunConfig {
            episodes: 2,
            logs: Some(logs),
            ..RunConfig::new(w, SlaSpec::new(PreferenceMode::Balanced), Method::WithTargetLogs, 6)
        })
        .unwrap();
        let init = second.init.unwrap();
        assert!(init.pretrained);
        assert_eq!(init.epsilon0, 0.1);
    }
}
