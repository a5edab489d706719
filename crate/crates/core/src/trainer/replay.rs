use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed transition `(x_n, a_n, r_n, x_{n+1})` of step `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transition {
    pub step: u64,
    pub x: usize,
    pub a: usize,
    pub reward: f64,
    pub next: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplayConfig {
    #[serde(default)]
    pub enabled: bool,
    /// `H`, the number of most recent transitions kept.
    pub capacity: usize,
    /// `Ĥ`, the mini-batch size.
    pub batch: usize,
}

impl ReplayConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            capacity: 1,
            batch: 1,
        }
    }

    pub fn new(capacity: usize, batch: usize) -> Self {
        Self {
            enabled: true,
            capacity,
            batch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.enabled {
            return Ok(());
        }
        if self.batch == 0 {
            return Err(Error::validation("replay.batch", "must be at least 1"));
        }
        if self.batch > self.capacity {
            return Err(Error::validation(
                "replay.batch",
                format!("batch {} exceeds capacity {}", self.batch, self.capacity),
            ));
        }
        Ok(())
    }
}

/// Ring of the last `H` transitions with a uniform without-replacement
/// mini-batch sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    batch: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, batch: usize) -> Result<Self> {
        ReplayConfig::new(capacity, batch).validate()?;
        Ok(Self {
            capacity,
            batch,
            items: VecDeque::with_capacity(capacity),
        })
    }

    pub fn from_contents(capacity: usize, batch: usize, items: Vec<Transition>) -> Result<Self> {
        let mut buf = Self::new(capacity, batch)?;
        if items.len() > capacity {
            return Err(Error::Input(format!(
                "{} stored transitions exceed capacity {capacity}",
                items.len()
            )));
        }
        buf.items.extend(items);
        Ok(buf)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn batch_size(&self) -> usize {
        self.batch
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn ready(&self) -> bool {
        self.items.len() >= self.batch
    }

    pub fn contents(&self) -> Vec<Transition> {
        self.items.iter().copied().collect()
    }

    /// Appends a transition, evicting the oldest one when full.
    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    /// `Ĥ` distinct transitions drawn uniformly from the current contents.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<Transition>> {
        if !self.ready() {
            return Err(Error::Precondition(format!(
                "replay buffer holds {} transitions, mini-batch needs {}",
                self.items.len(),
                self.batch
            )));
        }
        Ok(rand::seq::index::sample(rng, self.items.len(), self.batch)
            .into_iter()
            .map(|i| self.items[i])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(step: u64) -> Transition {
        Transition {
            step,
            x: 0,
            a: 0,
            reward: 0.0,
            next: 0,
        }
    }

    #[test]
    fn never_exceeds_capacity_and_keeps_the_latest() {
        let mut buf = ReplayBuffer::new(3, 2).unwrap();
        for s in 0..10 {
            buf.push(t(s));
            assert!(buf.len() <= 3);
        }
        let steps: Vec<u64> = buf.contents().iter().map(|t| t.step).collect();
        assert_eq!(steps, vec![7, 8, 9]);
    }

    #[test]
    fn underfilled_buffer_is_a_precondition_error() {
        let mut buf = ReplayBuffer::new(5, 2).unwrap();
        buf.push(t(0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(buf.sample(&mut rng), Err(Error::Precondition(_))));
    }

    #[test]
    fn batches_are_distinct_and_recent() {
        let mut buf = ReplayBuffer::new(50, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in 0..200 {
            buf.push(t(s));
            if buf.ready() {
                let batch = buf.sample(&mut rng).unwrap();
                let mut steps: Vec<u64> = batch.iter().map(|t| t.step).collect();
                steps.sort_unstable();
                steps.dedup();
                assert_eq!(steps.len(), 8);
                assert!(steps.iter().all(|&k| k + 50 > s && k <= s));
            }
        }
    }

    #[test]
    fn batch_larger_than_capacity_is_rejected() {
        assert!(ReplayBuffer::new(2, 3).is_err());
        assert!(ReplayBuffer::new(1, 1).is_ok());
    }
}
