//! Fixed-capacity experience replay with oldest-first eviction.

use rand::Rng;

use super::Transition;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: usize,
    /// Slot the next push overwrites once the buffer is full.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            head: 0,
        }
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

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// The `i`-th stored transition counted from the oldest.
    pub fn get(&self, i: usize) -> Option<&Transition> {
        if i >= self.items.len() {
            return None;
        }
        let idx = if self.items.len() < self.capacity {
            i
        } else {
            (self.head + i) % self.capacity
        };
        self.items.get(idx)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        (0..self.len()).filter_map(move |i| self.get(i))
    }

    /// Uniform draw of `n` indices, with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(!self.is_empty(), "sampling from an empty replay buffer");
        (0..n).map(|_| rng.random_range(0..self.len())).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        self.sample_indices(n, rng)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tagged(k: usize) -> Transition {
        Transition {
            obs: vec![k as f64],
            action: vec![0.0],
            reward: k as f64,
            next_obs: vec![0.0],
            done: false,
        }
    }

    #[test]
    fn eviction_keeps_last_capacity() {
        let cap = 17;
        for extra in [0, 1, 5, 17, 40] {
            let mut b = ReplayBuffer::new(cap);
            for k in 0..cap + extra {
                b.push(tagged(k));
            }
            assert_eq!(b.len(), cap);
            let kept: Vec<f64> = b.iter().map(|t| t.reward).collect();
            let want: Vec<f64> = (extra..cap + extra).map(|k| k as f64).collect();
            assert_eq!(kept, want);
        }
    }

    #[test]
    fn partial_fill_in_order() {
        let mut b = ReplayBuffer::new(10);
        for k in 0..4 {
            b.push(tagged(k));
        }
        assert_eq!(b.len(), 4);
        assert_eq!(b.get(3).unwrap().reward, 3.0);
        assert!(b.get(4).is_none());
    }

    #[test]
    fn sampling_is_uniform() {
        let n = 50;
        let mut b = ReplayBuffer::new(n);
        for k in 0..n {
            b.push(tagged(k));
        }
        let draws = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = vec![0usize; n];
        for i in b.sample_indices(draws, &mut rng) {
            counts[i] += 1;
        }
        let p = 1.0 / n as f64;
        let band = 3.0 * (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            let f = c as f64 / draws as f64;
            assert!((f - p).abs() < band, "frequency {f} vs {p}");
        }
    }
}
