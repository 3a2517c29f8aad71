//! SLA evaluation over the six tracked dimensions and the change detector
//! that gates adaptation.
//!
//! Severity is the relative shortfall (or overshoot) against the target,
//! clamped to `[0, 1]`. Time and cost are judged on projected whole-run
//! totals rather than on the instantaneous epoch.

use crate::cluster_sim::{ClusterSim, EpochMetrics, SimState, WorkloadSpec};
use crate::domain::{ComplianceVector, ResourceConfig, SlaDimension, SlaSpec, StateVector, NUM_SLA_DIMS};

/// Targets used when the user leaves a dimension unspecified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlaDefaults {
    pub gpu_util: f64,
    pub cpu_util: f64,
    /// Throughput floor as a fraction of the run's baseline throughput.
    pub throughput_fraction: f64,
}

impl Default for SlaDefaults {
    fn default() -> Self {
        Self { gpu_util: 0.6, cpu_util: 0.5, throughput_fraction: 0.8 }
    }
}

/// Fully resolved targets. Time and cost without a user target are
/// unbounded and therefore always met.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlaTargets {
    pub time_s: f64,
    pub cost_usd: f64,
    pub throughput_sps: f64,
    /// `None` means "at most the allocated memory".
    pub memory_gb: Option<f64>,
    pub gpu_util: f64,
    pub cpu_util: f64,
}

impl SlaTargets {
    pub fn resolve(spec: &SlaSpec, baseline_throughput_sps: f64, defaults: &SlaDefaults) -> Self {
        Self {
            time_s: spec.time_target_min.map_or(f64::INFINITY, |m| m * 60.0),
            cost_usd: spec.cost_target_usd.unwrap_or(f64::INFINITY),
            throughput_sps: spec
                .throughput_target_sps
                .unwrap_or(defaults.throughput_fraction * baseline_throughput_sps),
            memory_gb: spec.memory_target_gb,
            gpu_util: spec.gpu_util_target.unwrap_or(defaults.gpu_util),
            cpu_util: spec.cpu_util_target.unwrap_or(defaults.cpu_util),
        }
    }
}

/// Value must stay at or below `target`.
fn at_most(value: f64, target: f64) -> (bool, f64) {
    if !target.is_finite() || value <= target {
        return (true, 0.0);
    }
    (false, ((value - target) / target).clamp(0.0, 1.0))
}

/// Value must reach at least `target`.
fn at_least(value: f64, target: f64) -> (bool, f64) {
    if target <= 0.0 || value >= target {
        return (true, 0.0);
    }
    (false, ((target - value) / target).clamp(0.0, 1.0))
}

pub fn evaluate_compliance(
    metrics: &EpochMetrics,
    projected_total_time_s: f64,
    projected_total_cost_usd: f64,
    targets: &SlaTargets,
) -> ComplianceVector {
    let mut met = [true; NUM_SLA_DIMS];
    let mut severity = [0.0; NUM_SLA_DIMS];
    let checks = [
        (SlaDimension::Time, at_most(projected_total_time_s, targets.time_s)),
        (SlaDimension::Cost, at_most(projected_total_cost_usd, targets.cost_usd)),
        (SlaDimension::Throughput, at_least(metrics.throughput_sps, targets.throughput_sps)),
        (
            SlaDimension::Memory,
            at_most(metrics.memory_used_gb, targets.memory_gb.unwrap_or(metrics.memory_alloc_gb)),
        ),
        (SlaDimension::GpuUtil, at_least(metrics.gpu_util, targets.gpu_util)),
        (SlaDimension::CpuUtil, at_least(metrics.cpu_util, targets.cpu_util)),
    ];
    for (dim, (ok, sev)) in checks {
        met[dim.index()] = ok;
        severity[dim.index()] = sev;
    }
    ComplianceVector { met, severity }
}

/// Fires when the observation moved by more than `tau` (L2) or any SLA
/// dimension is currently violated.
pub fn change_detected(
    prev: &StateVector,
    cur: &StateVector,
    tau: f64,
    compliance: &ComplianceVector,
) -> bool {
    prev.distance(cur) > tau || compliance.any_violated()
}

/// Whole-run time and cost if the remaining epochs run noiselessly at `cfg`.
pub fn project_totals(
    sim: &ClusterSim,
    state: &SimState,
    cfg: ResourceConfig,
    workload: &WorkloadSpec,
) -> (f64, f64) {
    let remaining = workload.total_epochs.saturating_sub(state.epoch_completed) as f64;
    let epoch_time = sim.epoch_time(cfg, workload);
    let time = state.elapsed_s + remaining * epoch_time;
    let cost = state.spent_usd + remaining * epoch_time * sim.hourly_cost(cfg) / 3600.0;
    (time, cost)
}
