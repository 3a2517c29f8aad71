//! Actor-critic learner over the 9-action allocation space.
//!
//! The actor maps the 21-dimensional state to action probabilities; the
//! critic scores a `(state, one-hot action)` pair. Both are small MLPs with
//! hand-written backpropagation trained by Adam. The critic bootstraps from
//! the expectation of `Q(s', ·)` under the actor's distribution. The actor
//! follows the advantage policy gradient `Σ_a π(a|s) A(s,a) ∇log π(a|s)`,
//! with `A = Q - Σ_a π Q`, evaluated over all nine actions through the
//! critic rather than only at the replayed action.

mod adam;
pub mod checkpoint;
mod mlp;
mod replay;

pub use adam::Adam;
pub use mlp::{softmax, softmax_backward, ForwardTrace, Mlp};
pub use replay::{ReplayBuffer, Transition};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{NUM_ACTIONS, STATE_DIM};
use crate::error::{invalid, Result};

pub const ACTOR_SIZES: [usize; 4] = [STATE_DIM, 128, 64, NUM_ACTIONS];
pub const CRITIC_SIZES: [usize; 4] = [STATE_DIM + NUM_ACTIONS, 128, 64, 1];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// Entropy bonus on the actor loss; zero gives plain policy gradient.
    pub entropy_coef: f64,
    pub batch_size: usize,
    /// Updates start once the buffer holds this many transitions.
    pub warmup: usize,
    pub buffer_capacity: usize,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    /// Shrinks the initial output-layer range so the untrained policy is near uniform.
    pub output_init_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            actor_lr: 3e-4,
            critic_lr: 1e-3,
            gamma: 0.95,
            entropy_coef: 0.0,
            batch_size: 32,
            warmup: 32,
            buffer_capacity: ReplayBuffer::DEFAULT_CAPACITY,
            epsilon_decay: 0.995,
            epsilon_floor: 0.01,
            output_init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub actor: f64,
    pub critic: f64,
}

/// One supervised critic example.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainRow {
    pub state: [f64; STATE_DIM],
    pub action: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainReport {
    pub initial_mse: f64,
    /// Training-set MSE after each epoch.
    pub history: Vec<f64>,
}

impl PretrainReport {
    pub fn final_mse(&self) -> f64 {
        *self.history.last().unwrap_or(&self.initial_mse)
    }
}

#[derive(Debug, Clone)]
pub struct ActorCritic {
    pub actor: Mlp,
    pub critic: Mlp,
    actor_opt: Adam,
    critic_opt: Adam,
    pub config: AgentConfig,
}

fn critic_input(state: &[f64], action: usize) -> [f64; STATE_DIM + NUM_ACTIONS] {
    let mut x = [0.0; STATE_DIM + NUM_ACTIONS];
    x[..STATE_DIM].copy_from_slice(state);
    x[STATE_DIM + action] = 1.0;
    x
}

impl ActorCritic {
    pub fn new(config: AgentConfig, rng: &mut impl Rng) -> Self {
        let actor = Mlp::he_uniform(&ACTOR_SIZES, config.output_init_scale, rng);
        let critic = Mlp::he_uniform(&CRITIC_SIZES, config.output_init_scale, rng);
        Self::from_networks(actor, critic, config).expect("shapes are fixed")
    }

    pub fn zeroed(config: AgentConfig) -> Self {
        Self::from_networks(Mlp::zeros(&ACTOR_SIZES), Mlp::zeros(&CRITIC_SIZES), config).expect("shapes are fixed")
    }

    pub fn from_networks(actor: Mlp, critic: Mlp, config: AgentConfig) -> Result<Self> {
        if actor.sizes() != ACTOR_SIZES || critic.sizes() != CRITIC_SIZES {
            return invalid(format!(
                "network shapes {:?} / {:?} do not match {ACTOR_SIZES:?} / {CRITIC_SIZES:?}",
                actor.sizes(),
                critic.sizes()
            ));
        }
        Ok(Self {
            actor_opt: Adam::new(config.actor_lr, actor.num_params()),
            critic_opt: Adam::new(config.critic_lr, critic.num_params()),
            actor,
            critic,
            config,
        })
    }

    /// Replaces both networks, resetting optimizer state.
    pub fn load_networks(&mut self, actor: Mlp, critic: Mlp) -> Result<()> {
        *self = Self::from_networks(actor, critic, self.config)?;
        Ok(())
    }

    pub fn actor_forward(&self, state: &[f64]) -> Vec<f64> {
        softmax(&self.actor.forward(state))
    }

    pub fn critic_forward(&self, state: &[f64], action_one_hot: &[f64]) -> Result<f64> {
        if state.len() != STATE_DIM || action_one_hot.len() != NUM_ACTIONS {
            return invalid("critic input must be a 21-vector and a 9-vector");
        }
        let ones = action_one_hot.iter().filter(|v| **v == 1.0).count();
        let zeros = action_one_hot.iter().filter(|v| **v == 0.0).count();
        if ones != 1 || zeros != NUM_ACTIONS - 1 {
            return invalid("action encoding is not one-hot");
        }
        let mut x = state.to_vec();
        x.extend_from_slice(action_one_hot);
        Ok(self.critic.forward(&x)[0])
    }

    pub fn q_values(&self, state: &[f64]) -> [f64; NUM_ACTIONS] {
        let outs = self.critic.forward_one_hot_suffixes(state);
        std::array::from_fn(|k| outs[k][0])
    }

    /// ε-greedy: uniform with probability `epsilon`, otherwise a draw from the actor.
    pub fn select_action(&self, state: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
        if rng.random::<f64>() < epsilon {
            return rng.random_range(0..NUM_ACTIONS);
        }
        sample_categorical(&self.actor_forward(state), rng)
    }

    pub fn greedy_action(&self, state: &[f64]) -> usize {
        argmax(&self.actor_forward(state))
    }

    /// One gradient step for each network on `batch`; returns the mean losses
    /// measured before the step. The actor loss is `-E_π[Q(s, ·)]`.
    pub fn update(&mut self, batch: &[Transition]) -> Result<Losses> {
        if batch.is_empty() {
            return invalid("update needs a non-empty batch");
        }
        let n = batch.len() as f64;
        let gamma = self.config.gamma;
        let mut critic_grads = vec![0.0; self.critic.num_params()];
        let mut actor_grads = vec![0.0; self.actor.num_params()];
        let (mut actor_loss, mut critic_loss) = (0.0, 0.0);

        for t in batch {
            let target = if t.terminal {
                t.reward
            } else {
                let probs = self.actor_forward(&t.next_state);
                let q_next = self.q_values(&t.next_state);
                t.reward + gamma * probs.iter().zip(&q_next).map(|(p, q)| p * q).sum::<f64>()
            };

            let trace = self.critic.forward_cached(&critic_input(&t.state, t.action));
            let q = trace.output()[0];
            critic_loss += (q - target).powi(2);
            self.critic.backward(&trace, &[2.0 * (q - target) / n], &mut critic_grads);

            let actor_trace = self.actor.forward_cached(&t.state);
            let probs = softmax(actor_trace.output());
            let q_all = self.q_values(&t.state);
            let value: f64 = probs.iter().zip(&q_all).map(|(p, q)| p * q).sum();
            actor_loss -= value;

            // Expected policy gradient over the actor's own distribution:
            // d(-Σ π_k A_k)/dz_k = -π_k A_k with A_k = Q_k - V.
            let mut d_logits: Vec<f64> =
                probs.iter().zip(&q_all).map(|(p, q)| -p * (q - value) / n).collect();
            if self.config.entropy_coef != 0.0 {
                let entropy: f64 = -probs.iter().filter(|p| **p > 0.0).map(|p| p * p.ln()).sum::<f64>();
                for (d, p) in d_logits.iter_mut().zip(&probs) {
                    if *p > 0.0 {
                        // dH/dz_k = -π_k (ln π_k + H); the loss subtracts coef * H.
                        *d += self.config.entropy_coef * p * (p.ln() + entropy) / n;
                    }
                }
            }
            self.actor.backward(&actor_trace, &d_logits, &mut actor_grads);
        }

        self.critic_opt.step(self.critic.params_mut(), &critic_grads);
        self.actor_opt.step(self.actor.params_mut(), &actor_grads);
        Ok(Losses { actor: actor_loss / n, critic: critic_loss / n })
    }

    fn critic_mse(&self, rows: &[PretrainRow]) -> f64 {
        rows.iter()
            .map(|r| (self.critic.forward(&critic_input(&r.state, r.action))[0] - r.target).powi(2))
            .sum::<f64>()
            / rows.len() as f64
    }

    /// Supervised regression of the critic onto `rows`.
    pub fn pretrain_critic(
        &mut self,
        rows: &[PretrainRow],
        epochs: usize,
        batch_size: usize,
        rng: &mut impl Rng,
    ) -> Result<PretrainReport> {
        if rows.is_empty() {
            return invalid("critic pretraining needs at least one row");
        }
        if batch_size == 0 {
            return invalid("batch size must be positive");
        }
        if let Some(bad) = rows.iter().find(|r| r.action >= NUM_ACTIONS || !r.target.is_finite()) {
            return invalid(format!("bad pretraining row: action {}, target {}", bad.action, bad.target));
        }
        let initial_mse = self.critic_mse(rows);
        let mut order: Vec<usize> = (0..rows.len()).collect();
        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            order.shuffle(rng);
            for chunk in order.chunks(batch_size) {
                let n = chunk.len() as f64;
                let mut grads = vec![0.0; self.critic.num_params()];
                for &i in chunk {
                    let r = &rows[i];
                    let trace = self.critic.forward_cached(&critic_input(&r.state, r.action));
                    let err = trace.output()[0] - r.target;
                    self.critic.backward(&trace, &[2.0 * err / n], &mut grads);
                }
                self.critic_opt.step(self.critic.params_mut(), &grads);
            }
            history.push(self.critic_mse(rows));
        }
        Ok(PretrainReport { initial_mse, history })
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if *v > best.1 { (i, *v) } else { best })
        .0
}

fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// The agent plus its replay buffer, exploration rate and update cadence.
#[derive(Debug, Clone)]
pub struct Learner {
    pub agent: ActorCritic,
    pub buffer: ReplayBuffer,
    pub epsilon: f64,
    pub updates: usize,
}

impl Learner {
    pub fn new(agent: ActorCritic, epsilon: f64) -> Self {
        let buffer = ReplayBuffer::new(agent.config.buffer_capacity);
        Self { agent, buffer, epsilon, updates: 0 }
    }

    pub fn act(&self, state: &[f64], rng: &mut impl Rng) -> usize {
        self.agent.select_action(state, self.epsilon, rng)
    }

    /// Stores `t`, runs one update once warm, and decays ε.
    pub fn observe(&mut self, t: Transition, rng: &mut impl Rng) -> Result<Option<Losses>> {
        self.buffer.push(t);
        let cfg = self.agent.config;
        self.epsilon = (self.epsilon * cfg.epsilon_decay).max(cfg.epsilon_floor);
        if self.buffer.len() < cfg.warmup {
            return Ok(None);
        }
        let batch = self.buffer.sample(cfg.batch_size, rng);
        self.updates += 1;
        self.agent.update(&batch).map(Some)
    }
}
