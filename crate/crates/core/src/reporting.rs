//! Run summaries, resource recommendations and the plain-text SLA report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::cluster_sim::{ClusterSim, WorkloadSpec};
use crate::config::parse_kv;
use crate::domain::{ComplianceVector, PreferenceMode, ResourceConfig, SlaDimension, NUM_SLA_DIMS};
use crate::error::{Error, Result};
use crate::orchestrator::RunOutcome;

/// Machine-readable outcome of one run, as written to `summary.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub method: String,
    pub strategy: PreferenceMode,
    pub workload: String,
    pub seed: u64,
    pub gpus: u32,
    pub cpus: u32,
    pub memory_gb: f64,
    pub total_time_s: f64,
    pub total_cost_usd: f64,
    pub throughput_sps: f64,
    pub compliance: ComplianceVector,
    /// Fraction of all epochs in the run with every dimension met.
    pub compliance_rate: f64,
    pub episodes: usize,
}

impl RunSummary {
    /// Summarizes the selected episode of `outcome`.
    pub fn from_outcome(outcome: &RunOutcome, workload: &WorkloadSpec, sim: &ClusterSim, seed: u64) -> Self {
        let ep = outcome.selected_episode();
        Self {
            method: outcome.method.label().to_string(),
            strategy: outcome.mode,
            workload: workload.name.clone(),
            seed,
            gpus: ep.final_config.gpus,
            cpus: ep.final_config.cpus,
            memory_gb: sim.allocated_memory(ep.final_config),
            total_time_s: ep.total_time_s,
            total_cost_usd: ep.total_cost_usd,
            throughput_sps: ep.mean_throughput_sps,
            compliance: ep.final_compliance,
            compliance_rate: outcome.compliance_rate(),
            episodes: outcome.episodes.len(),
        }
    }

    pub fn config(&self) -> ResourceConfig {
        ResourceConfig { gpus: self.gpus, cpus: self.cpus }
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("method", self.method.clone());
        put("strategy", self.strategy.label().to_string());
        put("workload", self.workload.clone());
        put("seed", self.seed.to_string());
        put("gpus", self.gpus.to_string());
        put("cpus", self.cpus.to_string());
        put("memory_gb", self.memory_gb.to_string());
        put("total_time_s", self.total_time_s.to_string());
        put("total_cost_usd", self.total_cost_usd.to_string());
        put("throughput_sps", self.throughput_sps.to_string());
        put("compliance_rate", self.compliance_rate.to_string());
        put("episodes", self.episodes.to_string());
        for dim in SlaDimension::ALL {
            let (met, severity) = self.compliance.get(dim);
            put(&format!("met.{}", dim.key()), met.to_string());
            put(&format!("severity.{}", dim.key()), severity.to_string());
        }
        out
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let kv = parse_kv(text)?;
        let get = |k: &str| kv.get(k).map(String::as_str).ok_or_else(|| Error::Config(format!("summary is missing '{k}'")));
        fn num<T: std::str::FromStr>(kv: &BTreeMap<String, String>, k: &str) -> Result<T>
        where
            T::Err: std::fmt::Display,
        {
            let raw = kv.get(k).ok_or_else(|| Error::Config(format!("summary is missing '{k}'")))?;
            raw.parse().map_err(|e| Error::Config(format!("summary field '{k}' = '{raw}': {e}")))
        }
        let mut met = [true; NUM_SLA_DIMS];
        let mut severity = [0.0; NUM_SLA_DIMS];
        for dim in SlaDimension::ALL {
            met[dim.index()] = num(&kv, &format!("met.{}", dim.key()))?;
            severity[dim.index()] = num(&kv, &format!("severity.{}", dim.key()))?;
        }
        Ok(Self {
            method: get("method")?.to_string(),
            strategy: get("strategy")?.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            workload: get("workload")?.to_string(),
            seed: num(&kv, "seed")?,
            gpus: num(&kv, "gpus")?,
            cpus: num(&kv, "cpus")?,
            memory_gb: num(&kv, "memory_gb")?,
            total_time_s: num(&kv, "total_time_s")?,
            total_cost_usd: num(&kv, "total_cost_usd")?,
            throughput_sps: num(&kv, "throughput_sps")?,
            compliance: ComplianceVector { met, severity },
            compliance_rate: num(&kv, "compliance_rate")?,
            episodes: num(&kv, "episodes")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecommendationKind {
    TimeCritical,
    CostCritical,
    Balanced,
}

impl RecommendationKind {
    pub fn title(&self) -> &'static str {
        match self {
            RecommendationKind::TimeCritical => "Time-Critical Option",
            RecommendationKind::CostCritical => "Cost-Critical Option",
            RecommendationKind::Balanced => "Balanced Option",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            RecommendationKind::TimeCritical => "Maximize training speed at higher cost",
            RecommendationKind::CostCritical => "Minimize cost while maintaining acceptable performance",
            RecommendationKind::Balanced => "Current allocation (balanced between cost and performance)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recommendation {
    pub kind: RecommendationKind,
    pub config: ResourceConfig,
    pub memory_gb: f64,
    pub total_time_s: f64,
    /// Signed change in whole-run time against the current allocation, in percent.
    pub time_change_pct: f64,
    pub total_cost_usd: f64,
}

/// Grid search over the noiseless models. Time-critical minimizes whole-run
/// time; cost-critical minimizes cost among allocations no slower than
/// `acceptable_slowdown` times the time-critical one; balanced echoes
/// `current`. Ties go to the smaller allocation.
pub fn recommend(
    sim: &ClusterSim,
    workload: &WorkloadSpec,
    current: ResourceConfig,
    acceptable_slowdown: f64,
) -> [Recommendation; 3] {
    let epochs = workload.total_epochs as f64;
    let time = |c: ResourceConfig| sim.epoch_time(c, workload) * epochs;
    let cost = |c: ResourceConfig| sim.epoch_cost(c, workload) * epochs;
    let grid: Vec<ResourceConfig> = sim.bounds.grid().collect();
    let argmin = |f: &dyn Fn(ResourceConfig) -> f64, pool: &[ResourceConfig]| {
        pool.iter().copied().fold(None::<(ResourceConfig, f64)>, |best, c| match best {
            Some((_, v)) if v <= f(c) => best,
            _ => Some((c, f(c))),
        })
    };
    let fastest = argmin(&time, &grid).expect("non-empty grid").0;
    let limit = time(fastest) * acceptable_slowdown;
    let acceptable: Vec<ResourceConfig> = grid.iter().copied().filter(|c| time(*c) <= limit).collect();
    let cheapest = argmin(&cost, &acceptable).expect("fastest is acceptable").0;
    let current_time = time(current);
    let make = |kind, c: ResourceConfig| Recommendation {
        kind,
        config: c,
        memory_gb: sim.allocated_memory(c),
        total_time_s: time(c),
        time_change_pct: (time(c) - current_time) / current_time * 100.0,
        total_cost_usd: cost(c),
    };
    [
        make(RecommendationKind::TimeCritical, fastest),
        make(RecommendationKind::CostCritical, cheapest),
        make(RecommendationKind::Balanced, current),
    ]
}

/// One decimal from 1% up, two below.
pub fn format_pct(v: f64) -> String {
    let a = v.abs();
    if a >= 1.0 || a == 0.0 {
        format!("{a:.1}%")
    } else {
        format!("{a:.2}%")
    }
}

fn format_signed_pct(v: f64) -> String {
    if v < 0.0 && format_pct(v) != "0.0%" && format_pct(v) != "0.00%" {
        format!("-{}", format_pct(v))
    } else {
        format_pct(v)
    }
}

fn labeled_change(pct: f64, up: &str, down: &str) -> String {
    let text = format_pct(pct);
    if text == "0.0%" || text == "0.00%" {
        return format!("{text} (no change)");
    }
    format!("{text} ({})", if pct > 0.0 { up } else { down })
}

fn count_change(from: u32, to: u32) -> String {
    match to.cmp(&from) {
        std::cmp::Ordering::Equal => "(no changes)".to_string(),
        std::cmp::Ordering::Greater => format!("(increased by {})", to - from),
        std::cmp::Ordering::Less => format!("(decreased by {})", from - to),
    }
}

fn plural(n: u32, one: &str, many: &str) -> String {
    format!("{n} {}", if n == 1 { one } else { many })
}

fn compliance_section(out: &mut String, title: &str, c: &ComplianceVector) {
    let _ = writeln!(out, "{title}");
    for dim in SlaDimension::ALL {
        let (met, severity) = c.get(dim);
        if met {
            let _ = writeln!(out, "- {}: ✓ Met", dim.label());
        } else {
            let _ = writeln!(out, "- {}: ✗ Violated (severity: {severity:.2})", dim.label());
        }
    }
    out.push('\n');
}

/// Renders the report comparing `optimized` against `baseline`.
pub fn render_report(baseline: &RunSummary, optimized: &RunSummary, recs: &[Recommendation]) -> String {
    let mut out = String::new();
    compliance_section(&mut out, "Baseline SLA Compliance:", &baseline.compliance);
    compliance_section(&mut out, "Optimized SLA Compliance:", &optimized.compliance);

    let _ = writeln!(out, "Optimized Training Run:");
    let _ = writeln!(out, "- Optimization strategy: {}", optimized.strategy.label());
    let _ = writeln!(
        out,
        "- Resources: {}, {}, {:.1} GB memory",
        plural(optimized.gpus, "GPU", "GPUs"),
        plural(optimized.cpus, "CPU", "CPUs"),
        optimized.memory_gb
    );
    let _ = writeln!(out, "- Training time: {:.2} minutes", optimized.total_time_s / 60.0);
    let _ = writeln!(out, "- Cost: ${:.2}", optimized.total_cost_usd);
    let _ = writeln!(out, "- Throughput: {:.2} samples/sec", optimized.throughput_sps);
    out.push('\n');

    let rel = |b: f64, o: f64| if b != 0.0 { (o - b) / b * 100.0 } else { 0.0 };
    let _ = writeln!(out, "Improvements from Baseline:");
    let _ = writeln!(
        out,
        "- Time: {}",
        labeled_change(-rel(baseline.total_time_s, optimized.total_time_s), "faster", "slower")
    );
    let _ = writeln!(
        out,
        "- Cost: {}",
        labeled_change(rel(baseline.total_cost_usd, optimized.total_cost_usd), "increase", "decrease")
    );
    let _ = writeln!(
        out,
        "- Throughput: {}",
        labeled_change(rel(baseline.throughput_sps, optimized.throughput_sps), "increase", "decrease")
    );
    out.push('\n');

    let _ = writeln!(out, "Resource Changes:");
    let _ = writeln!(
        out,
        "- GPUs: {} → {} {}",
        baseline.gpus,
        optimized.gpus,
        count_change(baseline.gpus, optimized.gpus)
    );
    let _ = writeln!(
        out,
        "- CPUs: {} → {} {}",
        baseline.cpus,
        optimized.cpus,
        count_change(baseline.cpus, optimized.cpus)
    );
    out.push('\n');

    let _ = writeln!(out, "Optimization Recommendations:");
    for r in recs {
        out.push('\n');
        let _ = writeln!(out, "{}:", r.kind.title());
        let _ = writeln!(out, "GPUs: {}, CPUs: {}, Memory: {:.1} GB", r.config.gpus, r.config.cpus, r.memory_gb);
        let _ = writeln!(
            out,
            "Estimated time: {:.2} min ({} change), Cost: ${:.2} (for complete training)",
            r.total_time_s / 60.0,
            format_signed_pct(r.time_change_pct),
            r.total_cost_usd
        );
        let _ = writeln!(out, "Description: {}", r.kind.description());
    }
    out
}
