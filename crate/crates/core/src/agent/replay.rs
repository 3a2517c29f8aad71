use rand::Rng;

use crate::domain::{NUM_ACTIONS, STATE_DIM};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: [f64; STATE_DIM],
    pub action: usize,
    pub reward: f64,
    pub next_state: [f64; STATE_DIM],
    pub terminal: bool,
}

impl Transition {
    pub fn new(
        state: [f64; STATE_DIM],
        action: usize,
        reward: f64,
        next_state: [f64; STATE_DIM],
        terminal: bool,
    ) -> Result<Self> {
        if action >= NUM_ACTIONS {
            return invalid(format!("action index {action} out of range"));
        }
        if !(reward.is_finite() && state.iter().chain(&next_state).all(|v| v.is_finite())) {
            return invalid("transition contains non-finite values");
        }
        Ok(Self { state, action, reward, next_state, terminal })
    }
}

/// Fixed-capacity ring; the oldest transition is evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    /// Next slot to overwrite once full.
    head: usize,
}

impl ReplayBuffer {
    pub const DEFAULT_CAPACITY: usize = 100_000;

    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::new(), head: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Vec<Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..batch).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect()
    }
}
