//! Simulated HPC node: analytical cost and epoch-time models plus
//! synthesized utilization, throughput and memory signals.
//!
//! `step_epoch` executes one training epoch under an allocation. Noise is a
//! truncated Gaussian drawn from a generator seeded by `(rng_seed, epoch)`,
//! so traces are reproducible and independent of call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::domain::{ResourceBounds, ResourceConfig};
use crate::error::{invalid, Error, Result};

/// `σ(g) = 1 + 0.8 (g - 1)`.
pub fn gpu_scaling(gpus: u32) -> f64 {
    1.0 + 0.8 * (f64::from(gpus) - 1.0)
}

/// `ρ(c) = 1 + 0.1 log2(c)`.
pub fn cpu_benefit(cpus: u32) -> f64 {
    1.0 + 0.1 * f64::from(cpus).log2()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub gpu_hourly_usd: f64,
    pub cpu_hourly_usd: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { gpu_hourly_usd: 5.0, cpu_hourly_usd: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryModel {
    pub gb_per_gpu: f64,
    pub gb_per_cpu: f64,
}

impl Default for MemoryModel {
    fn default() -> Self {
        Self { gb_per_gpu: 8.0, gb_per_cpu: 1.0 }
    }
}

/// Parameters of a simulated training job.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub name: String,
    /// Epoch time on one GPU and one CPU core.
    pub t_base_s: f64,
    pub total_epochs: usize,
    pub dataset_size: u64,
    /// Fraction of a single GPU the job can saturate.
    pub gpu_intensity: f64,
    pub cpu_intensity: f64,
    pub model_mem_gb: f64,
    pub per_sample_mem_mb: f64,
    pub noise_sigma: f64,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(format!("workload '{}': {msg}", self.name)));
        if !(self.t_base_s.is_finite() && self.t_base_s > 0.0) {
            return fail(format!("t_base_s must be positive, got {}", self.t_base_s));
        }
        if self.total_epochs == 0 {
            return fail("total_epochs must be >= 1".into());
        }
        if self.dataset_size == 0 {
            return fail("dataset_size must be >= 1".into());
        }
        for (name, v) in [("gpu_intensity", self.gpu_intensity), ("cpu_intensity", self.cpu_intensity)] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        for (name, v) in [("model_mem_gb", self.model_mem_gb), ("per_sample_mem_mb", self.per_sample_mem_mb)] {
            if !(v.is_finite() && v >= 0.0) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.noise_sigma.is_finite() && (0.0..1.0 / 3.0).contains(&self.noise_sigma)) {
            return fail(format!("noise_sigma must be in [0, 1/3), got {}", self.noise_sigma));
        }
        Ok(())
    }

    /// A probe version of this job: `data_fraction` of the samples for
    /// `ceil(epoch_fraction * total_epochs)` epochs. Epoch time scales with data.
    pub fn subsample(&self, data_fraction: f64, epoch_fraction: f64) -> WorkloadSpec {
        let epochs = ((self.total_epochs as f64) * epoch_fraction).ceil().max(1.0) as usize;
        WorkloadSpec {
            name: self.name.clone(),
            t_base_s: self.t_base_s * data_fraction,
            total_epochs: epochs,
            dataset_size: ((self.dataset_size as f64) * data_fraction).round().max(1.0) as u64,
            ..self.clone()
        }
    }
}

/// Signals measured over one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch_time_s: f64,
    pub throughput_sps: f64,
    pub gpu_util: f64,
    pub cpu_util: f64,
    pub memory_used_gb: f64,
    pub memory_alloc_gb: f64,
    pub hourly_cost_usd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    pub epoch_completed: usize,
    pub elapsed_s: f64,
    pub spent_usd: f64,
    pub last_metrics: Option<EpochMetrics>,
    pub rng_seed: u64,
}

impl SimState {
    pub fn new(rng_seed: u64) -> Self {
        Self { epoch_completed: 0, elapsed_s: 0.0, spent_usd: 0.0, last_metrics: None, rng_seed }
    }

    pub fn is_finished(&self, workload: &WorkloadSpec) -> bool {
        self.epoch_completed >= workload.total_epochs
    }
}

/// SplitMix64 finalizer; decorrelates neighbouring seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The simulated environment. Holds model coefficients only; all run state
/// lives in [`SimState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterSim {
    pub cost: CostModel,
    pub memory: MemoryModel,
    pub bounds: ResourceBounds,
}

impl ClusterSim {
    pub fn new(cost: CostModel, memory: MemoryModel, bounds: ResourceBounds) -> Self {
        Self { cost, memory, bounds }
    }

    pub fn hourly_cost(&self, cfg: ResourceConfig) -> f64 {
        f64::from(cfg.gpus) * self.cost.gpu_hourly_usd + f64::from(cfg.cpus) * self.cost.cpu_hourly_usd
    }

    /// Noiseless `T_base / (σ(g) ρ(c))`.
    pub fn epoch_time(&self, cfg: ResourceConfig, workload: &WorkloadSpec) -> f64 {
        workload.t_base_s / (gpu_scaling(cfg.gpus) * cpu_benefit(cfg.cpus))
    }

    pub fn allocated_memory(&self, cfg: ResourceConfig) -> f64 {
        self.memory.gb_per_gpu * f64::from(cfg.gpus) + self.memory.gb_per_cpu * f64::from(cfg.cpus)
    }

    /// Per-step batch size: 64 per GPU, kept within [32, 512].
    pub fn batch_size(&self, cfg: ResourceConfig) -> u32 {
        (64 * cfg.gpus).clamp(32, 512)
    }

    /// Metrics with every noise term at zero.
    pub fn expected_metrics(&self, cfg: ResourceConfig, workload: &WorkloadSpec) -> EpochMetrics {
        self.synthesize(cfg, workload, [0.0; 3])
    }

    /// Cost of one noiseless epoch in dollars.
    pub fn epoch_cost(&self, cfg: ResourceConfig, workload: &WorkloadSpec) -> f64 {
        self.hourly_cost(cfg) * self.epoch_time(cfg, workload) / 3600.0
    }

    /// Highest noiseless throughput reachable inside the bounds; normalizes the
    /// throughput entry of the state vector.
    pub fn max_throughput(&self, workload: &WorkloadSpec) -> f64 {
        let top = ResourceConfig { gpus: self.bounds.max_gpus, cpus: self.bounds.max_cpus };
        workload.dataset_size as f64 / self.epoch_time(top, workload)
    }

    pub fn step_epoch(
        &self,
        state: &SimState,
        cfg: ResourceConfig,
        workload: &WorkloadSpec,
    ) -> Result<(SimState, EpochMetrics)> {
        if state.is_finished(workload) {
            return Err(Error::State(format!(
                "job '{}' already completed {} of {} epochs",
                workload.name, state.epoch_completed, workload.total_epochs
            )));
        }
        if !self.bounds.contains(cfg) {
            return invalid(format!("allocation {cfg} outside bounds"));
        }
        let noise = draw_noise(state.rng_seed, state.epoch_completed as u64, workload.noise_sigma);
        let metrics = self.synthesize(cfg, workload, noise);
        let next = SimState {
            epoch_completed: state.epoch_completed + 1,
            elapsed_s: state.elapsed_s + metrics.epoch_time_s,
            spent_usd: state.spent_usd + metrics.hourly_cost_usd * metrics.epoch_time_s / 3600.0,
            last_metrics: Some(metrics),
            rng_seed: state.rng_seed,
        };
        Ok((next, metrics))
    }

    fn synthesize(&self, cfg: ResourceConfig, workload: &WorkloadSpec, noise: [f64; 3]) -> EpochMetrics {
        let epoch_time_s = self.epoch_time(cfg, workload) * (1.0 + noise[0]);
        let gpu_util = (workload.gpu_intensity / f64::from(cfg.gpus).sqrt() + noise[1]).clamp(0.0, 1.0);
        let cpu_util = (workload.cpu_intensity / f64::from(cfg.cpus).sqrt() + noise[2]).clamp(0.0, 1.0);
        let batch = f64::from(self.batch_size(cfg));
        EpochMetrics {
            epoch_time_s,
            throughput_sps: workload.dataset_size as f64 / epoch_time_s,
            gpu_util,
            cpu_util,
            memory_used_gb: workload.model_mem_gb + workload.per_sample_mem_mb * batch / 1024.0,
            memory_alloc_gb: self.allocated_memory(cfg),
            hourly_cost_usd: self.hourly_cost(cfg),
        }
    }
}

/// Three independent draws (epoch time, GPU util, CPU util) from
/// `N(0, sigma)` truncated to `±3 sigma` by rejection.
fn draw_noise(run_seed: u64, epoch: u64, sigma: f64) -> [f64; 3] {
    if sigma == 0.0 {
        return [0.0; 3];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(run_seed, epoch));
    let normal = Normal::new(0.0, sigma).expect("sigma validated finite and positive");
    let mut out = [0.0; 3];
    for slot in &mut out {
        *slot = loop {
            let x: f64 = normal.sample(&mut rng);
            if x.abs() <= 3.0 * sigma {
                break x;
            }
        };
    }
    out
}
