//! SLA-aware multi-objective reinforcement learning for GPU/CPU allocation of
//! ML training jobs, together with the simulated cluster it runs against.

pub mod adaptive_reward;
pub mod agent;
pub mod cluster_sim;
pub mod config;
pub mod domain;
pub mod error;
pub mod init;
pub mod orchestrator;
pub mod reporting;
pub mod sla_monitor;

pub use error::{Error, Result};
