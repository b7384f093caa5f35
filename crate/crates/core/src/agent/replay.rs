use rand::seq::index::sample;
use rand::Rng;

use super::AgentError;

#[derive(Clone, Debug, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub action: usize,
    pub reward: f64,
    pub next_state: S,
    pub terminal: bool,
}

/// Fixed-capacity FIFO experience store.
#[derive(Clone, Debug)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    items: Vec<T>,
    next: usize,
    inserted: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
            inserted: 0,
        }
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

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    /// Adds `item`, evicting the oldest entry when full.
    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
        self.inserted += 1;
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// `batch` distinct entries, uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Result<Vec<&T>, AgentError> {
        if batch > self.items.len() {
            return Err(AgentError::BufferTooSmall {
                len: self.items.len(),
                batch,
            });
        }
        Ok(sample(rng, self.items.len(), batch).into_iter().map(|i| &self.items[i]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuralnet::seeded_rng;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn sample_without_replacement() {
        let mut b = ReplayBuffer::new(50);
        for i in 0..50 {
            b.push(i);
        }
        let mut rng = seeded_rng(3);
        for _ in 0..100 {
            let s: BTreeSet<i32> = b.sample(32, &mut rng).unwrap().into_iter().copied().collect();
            assert_eq!(s.len(), 32);
        }
    }

    #[test]
    fn too_small() {
        let mut b = ReplayBuffer::new(10);
        b.push(1);
        assert_eq!(
            b.sample(2, &mut seeded_rng(0)).unwrap_err(),
            AgentError::BufferTooSmall { len: 1, batch: 2 }
        );
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut b = ReplayBuffer::new(10);
        for i in 0..10 {
            b.push(i);
        }
        let mut counts = [0usize; 10];
        let mut rng = seeded_rng(11);
        for _ in 0..10_000 {
            for &x in b.sample(3, &mut rng).unwrap() {
                counts[x] += 1;
            }
        }
        // each entry included with p = 0.3 per draw
        let (n, p) = (10_000.0, 0.3);
        let sd = (n * p * (1.0 - p) as f64).sqrt();
        for c in counts {
            assert!((c as f64 - n * p).abs() < 4.0 * sd, "{counts:?}");
        }
    }

    proptest! {
        #[test]
        fn fifo_eviction(cap in 1usize..40, extra in 0usize..60) {
            let mut b = ReplayBuffer::new(cap);
            for i in 0..cap + extra {
                b.push(i);
            }
            prop_assert_eq!(b.len(), cap);
            let kept: Vec<usize> = b.iter().copied().collect();
            let expected: Vec<usize> = (extra..cap + extra).collect();
            prop_assert_eq!(kept, expected);
        }
    }
}
