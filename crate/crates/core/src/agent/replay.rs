use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Bootstrapping from `next_state` is masked when set.
    pub terminal: bool,
}

/// Experience replay with uniform sampling. Unbounded unless a capacity is
/// given, in which case the oldest transition is evicted first.
#[derive(Debug, Clone, Default)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: Option<usize>,
}

impl ReplayBuffer {
    pub fn unbounded() -> Self {
        ReplayBuffer::default()
    }

    pub fn with_capacity(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config(
                "replay_capacity",
                "bounded capacity must be positive",
            ));
        }
        Ok(ReplayBuffer {
            items: VecDeque::with_capacity(capacity),
            capacity: Some(capacity),
        })
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn push(&mut self, transition: Transition) -> Result<()> {
        if !transition.reward.is_finite() {
            return Err(Error::NonFinite("transition reward"));
        }
        if let Some(cap) = self.capacity {
            if self.items.len() == cap {
                self.items.pop_front();
            }
        }
        self.items.push_back(transition);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Transition> {
        self.items.get(index)
    }

    /// Oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `count` indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return Err(Error::Contract(
                "cannot sample from an empty replay buffer".into(),
            ));
        }
        Ok((0..count)
            .map(|_| rng.random_range(0..self.items.len()))
            .collect())
    }
}
