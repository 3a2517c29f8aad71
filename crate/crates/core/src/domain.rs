//! Value types shared by every module: allocations, actions, SLA
//! specifications, the 21-dimensional observation, and trace records.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Upper bounds of the allocation box. Lower bounds are always 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceBounds {
    pub max_gpus: u32,
    pub max_cpus: u32,
}

impl Default for ResourceBounds {
    fn default() -> Self {
        // One node: 4 GPUs, 40 cores.
        Self { max_gpus: 4, max_cpus: 40 }
    }
}

impl ResourceBounds {
    pub fn new(max_gpus: u32, max_cpus: u32) -> Result<Self> {
        if max_gpus == 0 || max_cpus == 0 {
            return invalid(format!("resource bounds must be >= 1, got ({max_gpus}, {max_cpus})"));
        }
        Ok(Self { max_gpus, max_cpus })
    }

    pub fn contains(&self, cfg: ResourceConfig) -> bool {
        (1..=self.max_gpus).contains(&cfg.gpus) && (1..=self.max_cpus).contains(&cfg.cpus)
    }

    /// Every allocation inside the box, GPU-major.
    pub fn grid(&self) -> impl Iterator<Item = ResourceConfig> + '_ {
        (1..=self.max_gpus)
            .flat_map(move |gpus| (1..=self.max_cpus).map(move |cpus| ResourceConfig { gpus, cpus }))
    }

    pub fn clamp(&self, cfg: ResourceConfig) -> ResourceConfig {
        ResourceConfig {
            gpus: cfg.gpus.clamp(1, self.max_gpus),
            cpus: cfg.cpus.clamp(1, self.max_cpus),
        }
    }
}

/// GPU count and CPU cores assigned to a training job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResourceConfig {
    pub gpus: u32,
    pub cpus: u32,
}

impl ResourceConfig {
    pub fn new(gpus: u32, cpus: u32, bounds: &ResourceBounds) -> Result<Self> {
        let cfg = Self { gpus, cpus };
        if !bounds.contains(cfg) {
            return invalid(format!(
                "allocation ({gpus} GPUs, {cpus} CPUs) outside [1, {}] x [1, {}]",
                bounds.max_gpus, bounds.max_cpus
            ));
        }
        Ok(cfg)
    }

    /// Normalized `[g / G_MAX, c / C_MAX]`.
    pub fn normalized(&self, bounds: &ResourceBounds) -> [f64; 2] {
        [
            f64::from(self.gpus) / f64::from(bounds.max_gpus),
            f64::from(self.cpus) / f64::from(bounds.max_cpus),
        ]
    }
}

impl fmt::Display for ResourceConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.gpus, self.cpus)
    }
}

/// One of the nine `(Δg, Δc)` resource deltas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Action {
    pub delta_gpu: i8,
    pub delta_cpu: i8,
}

pub const NUM_ACTIONS: usize = 9;

impl Action {
    pub const NOOP: Action = Action { delta_gpu: 0, delta_cpu: 0 };
    pub const NOOP_INDEX: usize = 4;

    /// Row-major over `(Δg, Δc)`, `-1 < 0 < +1`.
    pub fn from_index(index: usize) -> Result<Self> {
        if index >= NUM_ACTIONS {
            return invalid(format!("action index {index} out of range 0..{NUM_ACTIONS}"));
        }
        Ok(Self {
            delta_gpu: (index / 3) as i8 - 1,
            delta_cpu: (index % 3) as i8 - 1,
        })
    }

    pub fn index(&self) -> usize {
        ((self.delta_gpu + 1) as usize) * 3 + (self.delta_cpu + 1) as usize
    }

    pub fn all() -> impl Iterator<Item = Action> {
        (0..NUM_ACTIONS).map(|i| Action::from_index(i).expect("index in range"))
    }

    pub fn one_hot(&self) -> [f64; NUM_ACTIONS] {
        let mut v = [0.0; NUM_ACTIONS];
        v[self.index()] = 1.0;
        v
    }
}

/// Applies `action`, clamping the result to `bounds`.
pub fn apply_action(cfg: ResourceConfig, action: Action, bounds: &ResourceBounds) -> ResourceConfig {
    let step = |v: u32, d: i8, max: u32| (i64::from(v) + i64::from(d)).clamp(1, i64::from(max)) as u32;
    ResourceConfig {
        gpus: step(cfg.gpus, action.delta_gpu, bounds.max_gpus),
        cpus: step(cfg.cpus, action.delta_cpu, bounds.max_cpus),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreferenceMode {
    TimePriority,
    CostPriority,
    Balanced,
}

impl PreferenceMode {
    pub const ALL: [PreferenceMode; 3] =
        [PreferenceMode::TimePriority, PreferenceMode::CostPriority, PreferenceMode::Balanced];

    /// Positions: time, cost, balanced.
    pub fn one_hot(&self) -> [f64; 3] {
        match self {
            PreferenceMode::TimePriority => [1.0, 0.0, 0.0],
            PreferenceMode::CostPriority => [0.0, 1.0, 0.0],
            PreferenceMode::Balanced => [0.0, 0.0, 1.0],
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            PreferenceMode::TimePriority => "time",
            PreferenceMode::CostPriority => "cost",
            PreferenceMode::Balanced => "balanced",
        }
    }
}

impl fmt::Display for PreferenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PreferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "time" | "time_priority" | "timepriority" => Ok(PreferenceMode::TimePriority),
            "cost" | "cost_priority" | "costpriority" => Ok(PreferenceMode::CostPriority),
            "balanced" => Ok(PreferenceMode::Balanced),
            other => Err(Error::SlaSpec(format!("unknown preference mode '{other}'"))),
        }
    }
}

/// The six tracked SLA dimensions, in state-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlaDimension {
    Time,
    Cost,
    Throughput,
    Memory,
    GpuUtil,
    CpuUtil,
}

pub const NUM_SLA_DIMS: usize = 6;

impl SlaDimension {
    pub const ALL: [SlaDimension; NUM_SLA_DIMS] = [
        SlaDimension::Time,
        SlaDimension::Cost,
        SlaDimension::Throughput,
        SlaDimension::Memory,
        SlaDimension::GpuUtil,
        SlaDimension::CpuUtil,
    ];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn label(&self) -> &'static str {
        match self {
            SlaDimension::Time => "Time",
            SlaDimension::Cost => "Cost",
            SlaDimension::Throughput => "Throughput",
            SlaDimension::Memory => "Memory",
            SlaDimension::GpuUtil => "GPU Util",
            SlaDimension::CpuUtil => "CPU Util",
        }
    }

    /// Key used in summaries and config files.
    pub fn key(&self) -> &'static str {
        match self {
            SlaDimension::Time => "time",
            SlaDimension::Cost => "cost",
            SlaDimension::Throughput => "throughput",
            SlaDimension::Memory => "memory",
            SlaDimension::GpuUtil => "gpu_util",
            SlaDimension::CpuUtil => "cpu_util",
        }
    }
}

/// User preference plus optional per-dimension targets. Missing targets are
/// filled with defaults when the spec is resolved (see `sla_monitor`).
#[derive(Debug, Clone, PartialEq)]
pub struct SlaSpec {
    pub mode: PreferenceMode,
    pub time_target_min: Option<f64>,
    pub cost_target_usd: Option<f64>,
    pub throughput_target_sps: Option<f64>,
    pub memory_target_gb: Option<f64>,
    pub gpu_util_target: Option<f64>,
    pub cpu_util_target: Option<f64>,
}

impl SlaSpec {
    pub fn new(mode: PreferenceMode) -> Self {
        Self {
            mode,
            time_target_min: None,
            cost_target_usd: None,
            throughput_target_sps: None,
            memory_target_gb: None,
            gpu_util_target: None,
            cpu_util_target: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("time", self.time_target_min),
            ("cost", self.cost_target_usd),
            ("throughput", self.throughput_target_sps),
            ("memory", self.memory_target_gb),
            ("gpu_util", self.gpu_util_target),
            ("cpu_util", self.cpu_util_target),
        ];
        for (name, value) in positive {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::SlaSpec(format!("{name} target must be positive, got {v}")));
                }
            }
        }
        for (name, value) in [("gpu_util", self.gpu_util_target), ("cpu_util", self.cpu_util_target)] {
            if let Some(v) = value {
                if v > 1.0 {
                    return Err(Error::SlaSpec(format!("{name} target must be <= 1, got {v}")));
                }
            }
        }
        Ok(())
    }
}

/// Per-dimension met flags and violation severities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplianceVector {
    pub met: [bool; NUM_SLA_DIMS],
    pub severity: [f64; NUM_SLA_DIMS],
}

impl ComplianceVector {
    pub fn all_met() -> Self {
        Self { met: [true; NUM_SLA_DIMS], severity: [0.0; NUM_SLA_DIMS] }
    }

    /// Builds a vector from severities alone; a dimension is met iff its severity is zero.
    pub fn from_severities(severity: [f64; NUM_SLA_DIMS]) -> Self {
        let severity = severity.map(|s| s.clamp(0.0, 1.0));
        Self { met: severity.map(|s| s == 0.0), severity }
    }

    pub fn is_fully_met(&self) -> bool {
        self.met.iter().all(|m| *m)
    }

    pub fn any_violated(&self) -> bool {
        !self.is_fully_met()
    }

    pub fn met_count(&self) -> usize {
        self.met.iter().filter(|m| **m).count()
    }

    pub fn get(&self, dim: SlaDimension) -> (bool, f64) {
        (self.met[dim.index()], self.severity[dim.index()])
    }
}

pub const STATE_DIM: usize = 21;

/// Normalized observation `[r, u, p, c, v, w]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub allocation: [f64; 2],
    pub utilization: [f64; 2],
    /// Epoch progress and normalized throughput.
    pub progress: [f64; 2],
    pub compliance: [f64; NUM_SLA_DIMS],
    pub severity: [f64; NUM_SLA_DIMS],
    pub preference: [f64; 3],
}

impl StateVector {
    pub fn flatten(&self) -> [f64; STATE_DIM] {
        let mut out = [0.0; STATE_DIM];
        let parts: [&[f64]; 6] = [
            &self.allocation,
            &self.utilization,
            &self.progress,
            &self.compliance,
            &self.severity,
            &self.preference,
        ];
        let mut i = 0;
        for part in parts {
            out[i..i + part.len()].copy_from_slice(part);
            i += part.len();
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten). Rejects values outside `[0, 1]`,
    /// non-binary compliance flags and a preference that is not one-hot.
    pub fn parse(values: &[f64]) -> Result<Self> {
        if values.len() != STATE_DIM {
            return invalid(format!("state vector needs {STATE_DIM} values, got {}", values.len()));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("state component {bad} outside [0, 1]"));
        }
        let take = |range: std::ops::Range<usize>| values[range].to_vec();
        let state = Self {
            allocation: take(0..2).try_into().unwrap(),
            utilization: take(2..4).try_into().unwrap(),
            progress: take(4..6).try_into().unwrap(),
            compliance: take(6..12).try_into().unwrap(),
            severity: take(12..18).try_into().unwrap(),
            preference: take(18..21).try_into().unwrap(),
        };
        if state.compliance.iter().any(|c| *c != 0.0 && *c != 1.0) {
            return invalid("compliance flags must be 0 or 1");
        }
        let ones = state.preference.iter().filter(|p| **p == 1.0).count();
        let zeros = state.preference.iter().filter(|p| **p == 0.0).count();
        if ones != 1 || zeros != 2 {
            return invalid("preference must be one-hot");
        }
        Ok(state)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        self.flatten()
            .iter()
            .zip(other.flatten().iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// One row of an execution trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionRecord {
    pub episode: usize,
    pub step_index: usize,
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
    pub weights: [f64; 3],
    pub met: [bool; NUM_SLA_DIMS],
    pub severity: [f64; NUM_SLA_DIMS],
    pub action_index: usize,
    /// Whether the change detector fired and the policy chose `action_index`.
    pub decision: bool,
}
