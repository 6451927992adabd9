use std::collections::VecDeque;

use rand::Rng;

use crate::chem::Positions;
use crate::error::{Error, Result};

pub const DEFAULT_BUFFER_CAPACITY: usize = 2048;

/// FIFO store of geometries; pushing at capacity evicts the oldest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Positions>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "buffer capacity must be positive");
        ReplayBuffer { capacity, entries: VecDeque::with_capacity(capacity.min(4096)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry `i` in age order, 0 = oldest.
    pub fn get(&self, i: usize) -> &Positions {
        &self.entries[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Positions> {
        self.entries.iter()
    }

    pub fn push(&mut self, frame: Positions) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(frame);
    }

    pub fn extend(&mut self, frames: impl IntoIterator<Item = Positions>) {
        for f in frames {
            self.push(f);
        }
    }

    /// `k` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<Positions>> {
        if self.entries.is_empty() {
            return Err(Error::EmptySource("replay buffer is empty"));
        }
        Ok((0..k).map(|_| self.entries[rng.random_range(0..self.entries.len())].clone()).collect())
    }
}
