use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::market::{Price, Reward};

/// One observed interaction: the raw Gaussian draw, the price it became,
/// the reward it earned, and the log-probability under the policy that drew it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Experience {
    pub raw_action: f64,
    pub price: Price,
    pub reward: Reward,
    pub behavior_log_prob: f64,
    pub step_index: u64,
}

/// Bounded experience store, oldest entry first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    entries: VecDeque<Experience>,
    capacity: usize,
}

impl ReplayBuffer {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay buffer capacity must be positive");
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Appends `exp`, then evicts from the front until the length is back
    /// within capacity. Returns the number of evicted entries.
    pub fn push(&mut self, exp: Experience) -> usize {
        self.entries.push_back(exp);
        let mut evicted = 0;
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
            evicted += 1;
        }
        evicted
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &Experience> + '_ {
        self.entries.iter()
    }

    pub fn oldest(&self) -> Option<&Experience> {
        self.entries.front()
    }

    pub fn newest(&self) -> Option<&Experience> {
        self.entries.back()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(step: u64) -> Experience {
        Experience {
            raw_action: step as f64,
            price: Price::new(1.0).unwrap(),
            reward: Reward::new(step as f64).unwrap(),
            behavior_log_prob: 0.0,
            step_index: step,
        }
    }

    #[test]
    fn push_at_capacity_evicts_oldest() {
        let mut buf = ReplayBuffer::new(16);
        for s in 0..16 {
            assert_eq!(buf.push(exp(s)), 0);
        }
        assert!(buf.is_full());
        assert_eq!(buf.push(exp(16)), 1);
        assert_eq!(buf.len(), 16);
        assert_eq!(buf.oldest().unwrap().step_index, 1);
        assert_eq!(buf.newest().unwrap().step_index, 16);
    }

    #[test]
    fn entries_stay_ordered() {
        let mut buf = ReplayBuffer::new(5);
        for s in 0..23 {
            buf.push(exp(s));
            let steps: Vec<u64> = buf.iter().map(|e| e.step_index).collect();
            assert!(steps.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
