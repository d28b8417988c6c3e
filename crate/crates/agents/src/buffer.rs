use std::collections::VecDeque;

use rand::seq::index;
use rand::Rng;

use crate::state::StateTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: StateTensor,
    pub action: usize,
    pub reward: f64,
    pub next: StateTensor,
    /// The episode ended in a terminal state; the next state is not
    /// bootstrapped.
    pub done: bool,
}

/// Bounded FIFO of transitions; the oldest entry is evicted when full.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity.min(4096)) }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Up to `k` distinct transitions in random order.
    pub fn sample(&self, k: usize, rng: &mut impl Rng) -> Vec<&Transition> {
        index::sample(rng, self.items.len(), k.min(self.items.len())).into_iter().map(|i| &self.items[i]).collect()
    }
}
