//! Fixtures and statistics shared by the acceptance suite.

use slamorl::cluster_sim::WorkloadSpec;
use slamorl::orchestrator::RunOutcome;

/// Five synthetic 50-epoch jobs spanning GPU-bound to CPU-bound profiles.
pub fn synthetic_workload(i: usize) -> WorkloadSpec {
    let specs = [(600.0, 0.9, 0.9), (1200.0, 0.7, 0.95), (900.0, 0.95, 0.6), (300.0, 0.8, 0.8), (1500.0, 0.6, 0.7)];
    let (t_base_s, gpu_intensity, cpu_intensity) = specs[i];
    WorkloadSpec {
        name: format!("w{i}"),
        t_base_s,
        total_epochs: 50,
        dataset_size: 50_000,
        gpu_intensity,
        cpu_intensity,
        model_mem_gb: 4.0,
        per_sample_mem_mb: 8.0,
        noise_sigma: 0.03,
    }
}

pub const NUM_SYNTHETIC: usize = 5;

pub fn median(mut v: Vec<f64>) -> f64 {
    assert!(!v.is_empty(), "median of nothing");
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Episodes until the per-episode mean reward first reaches 90% of the final
/// level, where the final level is the mean of the last three episodes.
pub fn episodes_to_90(rewards: &[f64]) -> usize {
    let tail = &rewards[rewards.len().saturating_sub(3)..];
    let fin = tail.iter().sum::<f64>() / tail.len() as f64;
    let threshold = fin - 0.1 * fin.abs();
    rewards.iter().position(|x| *x >= threshold).expect("the tail reaches its own mean") + 1
}

pub fn episodes_to_90_of(outcome: &RunOutcome) -> f64 {
    episodes_to_90(&outcome.episode_rewards()) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn ninety_percent_point() {
        assert_eq!(episodes_to_90(&[0.1, 0.5, 0.95, 1.0, 1.0, 1.0]), 3);
        assert_eq!(episodes_to_90(&[-1.0, -0.5, -0.2, -0.2, -0.2]), 3);
        assert_eq!(episodes_to_90(&[1.0, 1.0, 1.0]), 1);
    }

    #[test]
    fn workloads_are_valid() {
        for i in 0..NUM_SYNTHETIC {
            synthetic_workload(i).validate().unwrap();
        }
    }
}
