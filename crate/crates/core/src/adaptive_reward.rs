//! Preference weights, severity-driven weight adaptation, and the scalarized
//! multi-objective reward with an SLA penalty.

use crate::cluster_sim::EpochMetrics;
use crate::domain::{ComplianceVector, PreferenceMode, NUM_SLA_DIMS};
use crate::error::{Error, Result};

/// Scalarization weights over (time, cost, utilization).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightVector {
    pub time: f64,
    pub cost: f64,
    pub util: f64,
}

impl WeightVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.time, self.cost, self.util]
    }

    pub fn from_array(w: [f64; 3]) -> Self {
        Self { time: w[0], cost: w[1], util: w[2] }
    }

    pub fn sum(&self) -> f64 {
        self.time + self.cost + self.util
    }

    pub fn normalized(&self) -> Self {
        let s = self.sum();
        Self::from_array(self.as_array().map(|w| w / s))
    }
}

pub fn base_weights(mode: PreferenceMode) -> WeightVector {
    match mode {
        PreferenceMode::TimePriority => WeightVector { time: 0.6, cost: 0.1, util: 0.3 },
        PreferenceMode::CostPriority => WeightVector { time: 0.1, cost: 0.6, util: 0.3 },
        PreferenceMode::Balanced => WeightVector { time: 0.3, cost: 0.3, util: 0.4 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Time,
    Cost,
    Util,
}

/// Which objective each SLA dimension feeds. Severities of dimensions that
/// share an objective are combined with `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveMap {
    pub assign: [Objective; NUM_SLA_DIMS],
}

impl Default for ObjectiveMap {
    fn default() -> Self {
        use Objective::*;
        // time, cost, throughput, memory, gpu_util, cpu_util
        Self { assign: [Time, Cost, Time, Util, Util, Util] }
    }
}

impl ObjectiveMap {
    /// Per-objective severity `[v_time, v_cost, v_util]`; met dimensions count as zero.
    pub fn aggregate(&self, compliance: &ComplianceVector) -> [f64; 3] {
        let mut out = [0.0f64; 3];
        for (i, objective) in self.assign.iter().enumerate() {
            if compliance.met[i] {
                continue;
            }
            let slot = &mut out[*objective as usize];
            *slot = slot.max(compliance.severity[i]);
        }
        out
    }
}

/// Raises the weight of each violated objective by `alpha * severity`, then
/// renormalizes. With no violation the base weights are returned unchanged.
pub fn adapt_weights(
    base: WeightVector,
    compliance: &ComplianceVector,
    alpha: f64,
    map: &ObjectiveMap,
) -> WeightVector {
    let severity = map.aggregate(compliance);
    if severity.iter().all(|v| *v == 0.0) {
        return base;
    }
    let b = base.as_array();
    WeightVector::from_array([0, 1, 2].map(|i| b[i] + alpha * severity[i])).normalized()
}

/// Reference point the time and cost terms are measured against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRefs {
    pub throughput_sps: f64,
    pub hourly_cost_usd: f64,
}

impl RewardRefs {
    pub fn from_metrics(m: &EpochMetrics) -> Self {
        Self { throughput_sps: m.throughput_sps, hourly_cost_usd: m.hourly_cost_usd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    /// SLA penalty scale.
    pub beta: f64,
    pub gpu_util_target: f64,
    pub cpu_util_target: f64,
    /// Time and cost terms are clamped to `[-clip, clip]`.
    pub clip: f64,
    pub objectives: ObjectiveMap,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            beta: 0.5,
            gpu_util_target: 0.8,
            cpu_util_target: 0.7,
            clip: 1.0,
            objectives: ObjectiveMap::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub time: f64,
    pub cost: f64,
    pub util: f64,
    pub penalty: f64,
    pub total: f64,
}

/// `w · (R_time, R_cost, R_util)`.
pub fn scalarize(components: [f64; 3], weights: &WeightVector) -> f64 {
    weights.time * components[0] + weights.cost * components[1] + weights.util * components[2]
}

/// Unweighted `(R_time, R_cost, R_util)` of `cur` against `refs`.
pub fn reward_components(cur: &EpochMetrics, refs: &RewardRefs, params: &RewardParams) -> Result<[f64; 3]> {
    if !(refs.throughput_sps > 0.0 && refs.hourly_cost_usd > 0.0) {
        return Err(Error::Config(format!(
            "reward references must be positive (throughput {}, hourly cost {})",
            refs.throughput_sps, refs.hourly_cost_usd
        )));
    }
    let clip = params.clip;
    let r_time = ((cur.throughput_sps - refs.throughput_sps) / refs.throughput_sps).clamp(-clip, clip);
    let r_cost = ((refs.hourly_cost_usd - cur.hourly_cost_usd) / refs.hourly_cost_usd).clamp(-clip, clip);
    let r_util = 1.0
        - ((cur.gpu_util - params.gpu_util_target).abs() + (cur.cpu_util - params.cpu_util_target).abs());
    Ok([r_time, r_cost, r_util])
}

pub fn reward(
    cur: &EpochMetrics,
    weights: &WeightVector,
    compliance: &ComplianceVector,
    refs: &RewardRefs,
    params: &RewardParams,
) -> Result<RewardBreakdown> {
    let [time, cost, util] = reward_components(cur, refs, params)?;
    let penalty = params.beta * params.objectives.aggregate(compliance).iter().sum::<f64>();
    Ok(RewardBreakdown {
        time,
        cost,
        util,
        penalty,
        total: scalarize([time, cost, util], weights) - penalty,
    })
}
