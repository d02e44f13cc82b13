//! Fixed-capacity FIFO replay memory with uniform sampling.

use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    /// Slot the next push overwrites once full.
    cursor: usize,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity), cursor: 0 }
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

    /// Stores `item`, evicting the oldest entry at capacity.
    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.cursor] = item;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Entries from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.cursor };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// `n` entries drawn uniformly with replacement, or `None` while fewer
    /// than `n` are stored.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Option<Vec<&T>> {
        if n == 0 || self.items.len() < n {
            return None;
        }
        Some((0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}
