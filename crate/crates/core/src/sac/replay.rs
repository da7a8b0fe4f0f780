use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::STATE_DIM;
use crate::scalar::Scalar;

/// One control frame as seen by the agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition<S> {
    pub state: [S; STATE_DIM],
    pub action: S,
    pub reward: S,
    pub next_state: [S; STATE_DIM],
    pub done: bool,
}

/// FIFO experience store with uniform sampling (with replacement).
///
/// `capacity: None` keeps everything.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<S> {
    capacity: Option<usize>,
    items: VecDeque<Transition<S>>,
}

impl<S: Scalar> ReplayBuffer<S> {
    pub fn new(capacity: Option<usize>) -> Self {
        assert!(capacity != Some(0), "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.unwrap_or(0)),
        }
    }

    pub fn bounded(capacity: usize) -> Self {
        Self::new(Some(capacity))
    }

    pub fn unbounded() -> Self {
        Self::new(None)
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends, evicting the oldest transition when full.
    pub fn push(&mut self, t: Transition<S>) {
        if let Some(cap) = self.capacity {
            if self.items.len() == cap {
                self.items.pop_front();
            }
        }
        self.items.push_back(t);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<S>> {
        self.items.iter()
    }

    pub fn get(&self, i: usize) -> Option<&Transition<S>> {
        self.items.get(i)
    }

    /// `n` uniformly drawn indices into the current contents.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let len = self.items.len();
        assert!(len > 0, "sampling an empty buffer");
        (0..n).map(|_| rng.gen_range(0..len)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition<S>> {
        self.sample_indices(n, rng)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(tag: f64) -> Transition<f64> {
        Transition {
            state: [tag; STATE_DIM],
            action: 0.0,
            reward: -1.0,
            next_state: [tag; STATE_DIM],
            done: false,
        }
    }

    #[test]
    fn fifo_eviction_keeps_newest() {
        let mut b = ReplayBuffer::bounded(1000);
        for i in 0..1007 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 1000);
        assert_eq!(b.get(0).unwrap().state[0], 7.0);
        assert_eq!(b.iter().last().unwrap().state[0], 1006.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(b.sample(5000, &mut rng).iter().all(|t| t.state[0] >= 7.0));
    }

    #[test]
    fn unbounded_keeps_everything() {
        let mut b = ReplayBuffer::unbounded();
        for i in 0..2500 {
            b.push(tr(i as f64));
        }
        assert_eq!(b.len(), 2500);
        assert_eq!(b.capacity(), None);
    }

    #[test]
    fn sampling_with_replacement_from_small_buffer() {
        let mut b = ReplayBuffer::bounded(10);
        b.push(tr(1.0));
        b.push(tr(2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = b.sample(256, &mut rng);
        assert_eq!(s.len(), 256);
        let ones = s.iter().filter(|t| t.state[0] == 1.0).count();
        assert!(ones > 90 && ones < 166, "{ones}");
    }
}
