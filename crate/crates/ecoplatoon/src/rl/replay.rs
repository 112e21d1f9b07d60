//! Bounded FIFO experience replay with uniform sampling.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;

use crate::graph::NestedTrafficGraph;

/// One environment transition. Observations are stored as full nested
/// graphs so the encoder can be replayed under the current weights;
/// `actions` holds one acceleration per connected vehicle in platoon
/// order, and `reward` is the fleet-level scalar.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: NestedTrafficGraph,
    pub actions: Vec<f64>,
    pub reward: f64,
    pub next_obs: NestedTrafficGraph,
    pub terminal: bool,
}

/// Ring of the most recent transitions; the oldest entry is evicted
/// once `capacity` is reached.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    items: VecDeque<Transition>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
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

    /// Uniform sample of `n` distinct transitions.
    pub fn sample(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<&Transition> {
        assert!(
            n <= self.items.len(),
            "requested {n} samples from {} stored",
            self.items.len()
        );
        rand::seq::index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_nested, NormConstants, StWeightParams, WeightScheme};
    use crate::sim::{build_scenario, LeaderTrajectory, ScenarioConfig};
    use rand::SeedableRng;

    fn transition(reward: f64) -> Transition {
        let cfg = ScenarioConfig {
            n_groups: 1,
            avs_per_group: 1,
            road_length: 1000.0,
            ..ScenarioConfig::default()
        };
        let traj = LeaderTrajectory::constant(10.0, 30.0).unwrap();
        let world = build_scenario(&cfg, &traj).unwrap();
        let nc = NormConstants::from_scenario(&cfg, 100.0);
        let g = build_nested(
            &world,
            &StWeightParams::default(),
            WeightScheme::Binary,
            WeightScheme::Binary,
            &nc,
        )
        .unwrap();
        Transition {
            obs: g.clone(),
            actions: vec![0.0],
            reward,
            next_obs: g,
            terminal: false,
        }
    }

    #[test]
    fn eviction_is_first_in_first_out() {
        let mut buf = ReplayBuffer::new(3);
        for r in 0..5 {
            buf.push(transition(r as f64));
        }
        assert_eq!(buf.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rewards: Vec<f64> = buf.sample(&mut rng, 3).iter().map(|t| t.reward).collect();
        // Only the last three pushes survive.
        for r in &rewards {
            assert!(*r >= 2.0);
        }
    }

    #[test]
    fn samples_are_distinct_and_deterministic() {
        let mut buf = ReplayBuffer::new(16);
        for r in 0..10 {
            buf.push(transition(r as f64));
        }
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let ra: Vec<f64> = buf.sample(&mut a, 6).iter().map(|t| t.reward).collect();
        let rb: Vec<f64> = buf.sample(&mut b, 6).iter().map(|t| t.reward).collect();
        assert_eq!(ra, rb);
        let mut sorted = ra.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        assert_eq!(sorted.len(), 6, "sampled indices must be distinct");
    }

    #[test]
    #[should_panic(expected = "requested")]
    fn oversampling_panics() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(transition(0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let _ = buf.sample(&mut rng, 2);
    }
}
