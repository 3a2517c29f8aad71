//! Flat `key = value` config files and the `mode[:key=value,...]` SLA syntax.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::cluster_sim::WorkloadSpec;
use crate::domain::{PreferenceMode, ResourceBounds, SlaSpec};
use crate::error::{Error, Result};
use crate::orchestrator::RunConfig;

/// Parses one `key = value` pair per line. Blank lines and text after `#`
/// are ignored; duplicate keys are an error.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1)))?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
        }
    }
    Ok(out)
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse().map_err(|e| Error::Config(format!("'{key}' = '{raw}': {e}")))
}

const WORKLOAD_KEYS: [&str; 9] = [
    "name",
    "t_base_s",
    "total_epochs",
    "dataset_size",
    "gpu_intensity",
    "cpu_intensity",
    "model_mem_gb",
    "per_sample_mem_mb",
    "noise_sigma",
];

/// Reads a workload file. Every key in [`WORKLOAD_KEYS`] except
/// `noise_sigma` (default 0.03) is required.
pub fn parse_workload(text: &str) -> Result<WorkloadSpec> {
    let kv = parse_kv(text)?;
    if let Some(k) = kv.keys().find(|k| !WORKLOAD_KEYS.contains(&k.as_str())) {
        return Err(Error::Config(format!("unknown workload key '{k}'")));
    }
    let req = |k: &str| kv.get(k).ok_or_else(|| Error::Config(format!("workload is missing '{k}'")));
    let spec = WorkloadSpec {
        name: req("name")?.clone(),
        t_base_s: value("t_base_s", req("t_base_s")?)?,
        total_epochs: value("total_epochs", req("total_epochs")?)?,
        dataset_size: value("dataset_size", req("dataset_size")?)?,
        gpu_intensity: value("gpu_intensity", req("gpu_intensity")?)?,
        cpu_intensity: value("cpu_intensity", req("cpu_intensity")?)?,
        model_mem_gb: value("model_mem_gb", req("model_mem_gb")?)?,
        per_sample_mem_mb: value("per_sample_mem_mb", req("per_sample_mem_mb")?)?,
        noise_sigma: kv.get("noise_sigma").map(|v| value("noise_sigma", v)).transpose()?.unwrap_or(0.03),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn write_workload(spec: &WorkloadSpec) -> String {
    format!(
        "name = {}\nt_base_s = {}\ntotal_epochs = {}\ndataset_size = {}\ngpu_intensity = {}\ncpu_intensity = {}\nmodel_mem_gb = {}\nper_sample_mem_mb = {}\nnoise_sigma = {}\n",
        spec.name,
        spec.t_base_s,
        spec.total_epochs,
        spec.dataset_size,
        spec.gpu_intensity,
        spec.cpu_intensity,
        spec.model_mem_gb,
        spec.per_sample_mem_mb,
        spec.noise_sigma
    )
}

/// Parses `mode` or `mode:key=value,...`. Keys are `time` (minutes), `cost`
/// (USD), `throughput` (samples/s), `memory` (GB), `gpu_util` and `cpu_util`.
pub fn parse_sla(text: &str) -> Result<SlaSpec> {
    let (mode, rest) = match text.split_once(':') {
        Some((m, r)) => (m, Some(r)),
        None => (text, None),
    };
    let mut spec = SlaSpec::new(PreferenceMode::from_str(mode)?);
    for item in rest.into_iter().flat_map(|r| r.split(',')).map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::SlaSpec(format!("expected 'key=value', got '{item}'")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::SlaSpec(format!("target '{}' is not a number: '{}'", k.trim(), v.trim())))?;
        let slot = match k.trim() {
            "time" => &mut spec.time_target_min,
            "cost" => &mut spec.cost_target_usd,
            "throughput" => &mut spec.throughput_target_sps,
            "memory" => &mut spec.memory_target_gb,
            "gpu_util" | "gpu" => &mut spec.gpu_util_target,
            "cpu_util" | "cpu" => &mut spec.cpu_util_target,
            other => return Err(Error::SlaSpec(format!("unknown SLA target '{other}'"))),
        };
        if slot.replace(v).is_some() {
            return Err(Error::SlaSpec(format!("SLA target '{}' given twice", k.trim())));
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Settings read from a run config file that are not part of [`RunConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportSettings {
    /// Cost-critical recommendations may be this many times slower than the fastest.
    pub acceptable_slowdown: f64,
}

impl Default for ReportSettings {
    fn default() -> Self {
        Self { acceptable_slowdown: 1.5 }
    }
}

/// Applies a run config file on top of `cfg`. Unknown keys are an error.
pub fn apply_run_settings(cfg: &mut RunConfig, text: &str) -> Result<ReportSettings> {
    let mut report = ReportSettings::default();
    let mut bounds = cfg.sim.bounds;
    for (k, raw) in parse_kv(text)? {
        let key = k.as_str();
        match key {
            "episodes" => cfg.episodes = value(key, &raw)?,
            "tau_change" => cfg.tau_change = value(key, &raw)?,
            "alpha" => cfg.alpha = value(key, &raw)?,
            "gamma" => cfg.gamma = value(key, &raw)?,
            "beta" => cfg.reward.beta = value(key, &raw)?,
            "reward_clip" => cfg.reward.clip = value(key, &raw)?,
            "reward_gpu_util_target" => cfg.reward.gpu_util_target = value(key, &raw)?,
            "reward_cpu_util_target" => cfg.reward.cpu_util_target = value(key, &raw)?,
            "sla_default_gpu_util" => cfg.sla_defaults.gpu_util = value(key, &raw)?,
            "sla_default_cpu_util" => cfg.sla_defaults.cpu_util = value(key, &raw)?,
            "sla_default_throughput_fraction" => cfg.sla_defaults.throughput_fraction = value(key, &raw)?,
            "actor_lr" => cfg.agent.actor_lr = value(key, &raw)?,
            "critic_lr" => cfg.agent.critic_lr = value(key, &raw)?,
            "entropy_coef" => cfg.agent.entropy_coef = value(key, &raw)?,
            "batch_size" => cfg.agent.batch_size = value(key, &raw)?,
            "epsilon_decay" => cfg.agent.epsilon_decay = value(key, &raw)?,
            "epsilon_floor" => cfg.agent.epsilon_floor = value(key, &raw)?,
            "pretrain_epochs" => cfg.init.pretrain_epochs = value(key, &raw)?,
            "basic_cpus" => cfg.basic_cpus = value(key, &raw)?,
            "gpu_hourly_usd" => cfg.sim.cost.gpu_hourly_usd = value(key, &raw)?,
            "cpu_hourly_usd" => cfg.sim.cost.cpu_hourly_usd = value(key, &raw)?,
            "gb_per_gpu" => cfg.sim.memory.gb_per_gpu = value(key, &raw)?,
            "gb_per_cpu" => cfg.sim.memory.gb_per_cpu = value(key, &raw)?,
            "max_gpus" => bounds.max_gpus = value(key, &raw)?,
            "max_cpus" => bounds.max_cpus = value(key, &raw)?,
            "adapt_weights" => cfg.adapt_weights = value(key, &raw)?,
            "acceptable_slowdown" => report.acceptable_slowdown = value(key, &raw)?,
            other => return Err(Error::Config(format!("unknown run setting '{other}'"))),
        }
    }
    cfg.sim.bounds = ResourceBounds::new(bounds.max_gpus, bounds.max_cpus)
        .map_err(|e| Error::Config(e.to_string()))?;
    if !(report.acceptable_slowdown.is_finite() && report.acceptable_slowdown >= 1.0) {
        return Err(Error::Config(format!(
            "acceptable_slowdown must be >= 1, got {}",
            report.acceptable_slowdown
        )));
    }
    Ok(report)
}
