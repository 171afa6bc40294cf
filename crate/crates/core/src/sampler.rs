//! Growable Fenwick tree used as a dynamic weighted sampler.
//!
//! Items are addressed by insertion index. Weights may be updated in place;
//! drawing an item with probability proportional to its weight is a single
//! top-down descent of the tree.

use std::ops::{Add, Sub};

/// Weight types the sampler can hold.
pub trait Weight: Copy + Default + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    fn to_f64(self) -> f64;
}

impl Weight for u64 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Weight for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Debug, Default)]
pub struct FenwickSampler<T: Weight> {
    values: Vec<T>,
    // 1-based implicit tree over a power-of-two capacity.
    tree: Vec<T>,
    total: T,
}

impl<T: Weight> FenwickSampler<T> {
    pub fn new() -> Self {
        Self::with_capacity(16)
    }

    pub fn with_capacity(capacity: usize) -> Self {
        let cap = capacity.max(1).next_power_of_two();
        FenwickSampler {
            values: Vec::with_capacity(cap),
            tree: vec![T::default(); cap + 1],
            total: T::default(),
        }
    }

    pub fn from_weights(weights: &[T]) -> Self {
        let mut s = Self::with_capacity(weights.len());
        for &w in weights {
            s.push(w);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Incrementally maintained sum of all weights.
    pub fn total(&self) -> T {
        self.total
    }

    pub fn weight(&self, index: usize) -> T {
        self.values[index]
    }

    pub fn weights(&self) -> &[T] {
        &self.values
    }

    fn capacity(&self) -> usize {
        self.tree.len() - 1
    }

    /// Appends an item and returns its index.
    pub fn push(&mut self, weight: T) -> usize {
        if self.values.len() == self.capacity() {
            self.grow();
        }
        let index = self.values.len();
        self.values.push(T::default());
        self.add(index, weight);
        index
    }

    fn grow(&mut self) {
        let cap = self.capacity() * 2;
        let mut tree = vec![T::default(); cap + 1];
        // Linear-time rebuild from the stored values.
        for (i, &v) in self.values.iter().enumerate() {
            tree[i + 1] = tree[i + 1] + v;
        }
        for i in 1..=cap {
            let parent = i + (i & i.wrapping_neg());
            if parent <= cap {
                let v = tree[i];
                tree[parent] = tree[parent] + v;
            }
        }
        self.tree = tree;
    }

    /// Adds `delta` to the weight of `index`.
    pub fn add(&mut self, index: usize, delta: T) {
        self.values[index] = self.values[index] + delta;
        self.total = self.total + delta;
        let cap = self.capacity();
        let mut i = index + 1;
        while i <= cap {
            self.tree[i] = self.tree[i] + delta;
            i += i & i.wrapping_neg();
        }
    }

    pub fn set(&mut self, index: usize, weight: T) {
        let old = self.values[index];
        if weight >= old {
            self.add(index, weight - old);
        } else {
            // Subtraction through the tree keeps unsigned weights valid.
            let delta = old - weight;
            self.values[index] = weight;
            self.total = self.total - delta;
            let cap = self.capacity();
            let mut i = index + 1;
            while i <= cap {
                self.tree[i] = self.tree[i] - delta;
                i += i & i.wrapping_neg();
            }
        }
    }

    /// Sum of the weights of items `0..end`.
    pub fn prefix_sum(&self, end: usize) -> T {
        let mut acc = T::default();
        let mut i = end;
        while i > 0 {
            acc = acc + self.tree[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }

    /// Index of the item whose cumulative weight interval contains `target`,
    /// i.e. the smallest `i` with `prefix_sum(i + 1) > target`.
    ///
    /// Returns `None` when the sampler is empty. Targets at or beyond the
    /// total land on the last item with nonzero weight.
    pub fn find(&self, target: T) -> Option<usize> {
        if self.values.is_empty() {
            return None;
        }
        let cap = self.capacity();
        let mut pos = 0usize;
        let mut remaining = target;
        let mut step = cap;
        while step > 0 {
            let next = pos + step;
            if next <= cap && self.tree[next] <= remaining {
                pos = next;
                remaining = remaining - self.tree[pos];
            }
            step >>= 1;
        }
        let mut index = pos.min(self.values.len() - 1);
        // Rounding can leave the descent past the final positive weight.
        while index > 0 && self.values[index] <= T::default() {
            index -= 1;
        }
        Some(index)
    }

    /// Recomputes the total from scratch.
    pub fn recompute_total(&self) -> T {
        self.values.iter().fold(T::default(), |acc, &v| acc + v)
    }
}

impl FenwickSampler<u64> {
    /// Draws an index with probability proportional to its weight.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if self.total == 0 {
            return None;
        }
        let target = rng.gen_range(0..self.total);
        self.find(target)
    }
}

impl FenwickSampler<f64> {
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        if !(self.total > 0.0) {
            return None;
        }
        let target = rng.gen::<f64>() * self.total;
        self.find(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn find_matches_linear_scan() {
        let weights: Vec<u64> = vec![3, 0, 5, 1, 0, 0, 7, 2];
        let s = FenwickSampler::from_weights(&weights);
        assert_eq!(s.total(), 18);
        let mut cum = 0;
        for (i, &w) in weights.iter().enumerate() {
            for t in cum..cum + w {
                assert_eq!(s.find(t), Some(i), "target {t}");
            }
            cum += w;
        }
    }

    #[test]
    fn grows_past_initial_capacity() {
        let mut s = FenwickSampler::<u64>::with_capacity(2);
        for i in 0..100u64 {
            s.push(i + 1);
        }
        assert_eq!(s.total(), 5050);
        assert_eq!(s.prefix_sum(10), 55);
        assert_eq!(s.find(54), Some(9));
        assert_eq!(s.find(55), Some(10));
    }

    #[test]
    fn set_decreases_weight() {
        let mut s = FenwickSampler::from_weights(&[4u64, 4, 4]);
        s.set(1, 1);
        assert_eq!(s.total(), 9);
        assert_eq!(s.find(4), Some(1));
        assert_eq!(s.find(5), Some(2));
        s.set(1, 6);
        assert_eq!(s.total(), 14);
    }

    #[test]
    fn empty_sampler_draws_nothing() {
        let s = FenwickSampler::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(s.sample(&mut rng), None);
        assert_eq!(s.find(0.0), None);
    }

    #[test]
    fn float_target_at_total_stays_in_range() {
        let s = FenwickSampler::from_weights(&[0.5, 0.25, 0.0]);
        assert_eq!(s.find(0.75), Some(1));
        assert_eq!(s.find(10.0), Some(1));
    }

    proptest! {
        #[test]
        fn prefix_sums_track_updates(
            init in proptest::collection::vec(0u64..50, 1..64),
            updates in proptest::collection::vec((0usize..64, 0u64..50), 0..64),
        ) {
            let mut s = FenwickSampler::with_capacity(4);
            let mut shadow = Vec::new();
            for w in init {
                s.push(w);
                shadow.push(w);
            }
            for (i, w) in updates {
                let i = i % shadow.len();
                s.set(i, w);
                shadow[i] = w;
            }
            let mut cum = 0;
            for (i, &w) in shadow.iter().enumerate() {
                prop_assert_eq!(s.prefix_sum(i), cum);
                cum += w;
            }
            prop_assert_eq!(s.total(), cum);
            prop_assert_eq!(s.recompute_total(), cum);
        }
    }
}
