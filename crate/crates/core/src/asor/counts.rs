use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::StateId;

pub const DEFAULT_BUCKETS: usize = 1024;

/// Random-hyperplane count sketch over state features.
///
/// Features are standardized per dimension, then each of `log2(B)` Gaussian
/// hyperplanes contributes one bit of the bucket index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedCounts {
    pub seed: u64,
    pub num_buckets: usize,
    pub buckets: Vec<u64>,
    /// Bucket of every state, fixed at construction.
    pub assignment: Vec<usize>,
}

impl HashedCounts {
    pub fn new(features: &[Vec<f64>], num_buckets: usize, seed: u64) -> Result<Self> {
        if !num_buckets.is_power_of_two() || num_buckets < 2 {
            return Err(Error::Config(format!(
                "bucket count {num_buckets} must be a power of two ≥ 2"
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::Config(
                "state features have inconsistent dimensions".into(),
            ));
        }
        let bits = num_buckets.trailing_zeros() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let planes: Vec<Vec<f64>> = (0..bits)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let standardized = standardize(features, dim);
        let assignment = standardized.iter().map(|f| bucket_of(&planes, f)).collect();
        Ok(Self {
            seed,
            num_buckets,
            buckets: vec![0; num_buckets],
            assignment,
        })
    }

    pub fn count(&self, s: StateId) -> u64 {
        self.buckets[self.assignment[s.0]]
    }
}

fn standardize(features: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let n = features.len().max(1) as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|k| features.iter().map(|f| f[k]).sum::<f64>() / n)
        .collect();
    let std: Vec<f64> = (0..dim)
        .map(|k| {
            let var = features
                .iter()
                .map(|f| (f[k] - mean[k]).powi(2))
                .sum::<f64>()
                / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    features
        .iter()
        .map(|f| (0..dim).map(|k| (f[k] - mean[k]) / std[k]).collect())
        .collect()
}

fn bucket_of(planes: &[Vec<f64>], f: &[f64]) -> usize {
    planes.iter().enumerate().fold(0, |acc, (bit, w)| {
        let dot: f64 = w.iter().zip(f).map(|(a, b)| a * b).sum();
        if dot > 0.0 {
            acc | (1 << bit)
        } else {
            acc
        }
    })
}

/// Where the partition reads visitation counts from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountSource {
    #[default]
    Exact,
    Hashed,
}

/// Exact per-state visit counts with an optional hashed sketch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitCounts {
    pub counts: Vec<u64>,
    pub total: u64,
    pub hashed: Option<HashedCounts>,
}

impl VisitCounts {
    pub fn new(num_states: usize) -> Self {
        Self {
            counts: vec![0; num_states],
            total: 0,
            hashed: None,
        }
    }

    pub fn with_sketch(num_states: usize, sketch: HashedCounts) -> Result<Self> {
        if sketch.assignment.len() != num_states {
            return Err(Error::Config(
                "sketch covers a different number of states".into(),
            ));
        }
        Ok(Self {
            hashed: Some(sketch),
            ..Self::new(num_states)
        })
    }

    pub fn record(&mut self, s: StateId) {
        self.counts[s.0] += 1;
        self.total += 1;
        if let Some(h) = &mut self.hashed {
            h.buckets[h.assignment[s.0]] += 1;
        }
    }

    pub fn update(&mut self, batch: impl IntoIterator<Item = StateId>) {
        for s in batch {
            self.record(s);
        }
    }

    pub fn count(&self, s: StateId, source: CountSource) -> u64 {
        match (source, &self.hashed) {
            (CountSource::Hashed, Some(h)) => h.count(s),
            _ => self.counts[s.0],
        }
    }
}

/// Functional form of [`VisitCounts::update`].
pub fn update_counts(mut vc: VisitCounts, batch: &[StateId]) -> VisitCounts {
    vc.update(batch.iter().copied());
    vc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![(i / 6) as f64, (i % 6) as f64, (i % 2) as f64])
            .collect()
    }

    #[test]
    fn empty_batch_is_noop() {
        let vc = VisitCounts::new(4);
        assert_eq!(update_counts(vc.clone(), &[]), vc);
    }

    #[test]
    fn repeated_state_adds_up() {
        let vc = update_counts(VisitCounts::new(4), &[StateId(2); 5]);
        assert_eq!(vc.counts, vec![0, 0, 5, 0]);
        assert_eq!(vc.total, 5);
    }

    #[test]
    fn sketch_is_seed_deterministic() {
        let a = HashedCounts::new(&features(36), 1024, 7).unwrap();
        let b = HashedCounts::new(&features(36), 1024, 7).unwrap();
        assert_eq!(a, b);
        assert!(HashedCounts::new(&features(3), 1000, 7).is_err());
    }

    #[test]
    fn colliding_states_share_their_bucket_total() {
        let feats = features(36);
        let sketch = HashedCounts::new(&feats, 4, 3).unwrap();
        let mut vc = VisitCounts::with_sketch(36, sketch).unwrap();
        let batch: Vec<StateId> = (0..36)
            .flat_map(|s| std::iter::repeat_n(StateId(s), s % 5 + 1))
            .collect();
        vc.update(batch.iter().copied());
        let h = vc.hashed.as_ref().unwrap();
        for s in 0..36 {
            let same: u64 = (0..36)
                .filter(|&t| h.assignment[t] == h.assignment[s])
                .map(|t| vc.counts[t])
                .sum();
            assert_eq!(vc.count(StateId(s), CountSource::Hashed), same);
        }
        assert_eq!(h.buckets.iter().sum::<u64>(), vc.total);
    }
}
