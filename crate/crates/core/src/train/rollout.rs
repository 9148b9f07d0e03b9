use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, HipMdp, StateId, TabularPolicy};

pub const DEFAULT_HORIZON: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
    /// Environment reward, never including any augmentation bonus.
    pub reward: f64,
    pub next_state: StateId,
    pub terminal: bool,
}

/// One episode under a single hidden parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub theta: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn undiscounted_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Whether the episode ended in an absorbing state rather than by truncation.
    pub fn terminated(&self) -> bool {
        self.steps.last().is_some_and(|s| s.terminal)
    }
}

/// Draws an index from a discrete distribution given by `probs`.
pub(crate) fn sample_index<R: Rng + ?Sized>(
    probs: impl Iterator<Item = f64>,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples `n_episodes` episodes. Each draws θ from the family weights and a
/// start state from `ρ0`, then runs until it enters a terminal state or
/// reaches `horizon` steps.
pub fn rollout<R: Rng + ?Sized>(
    mdp: &HipMdp,
    pi: &TabularPolicy,
    n_episodes: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    mdp.check_policy(pi)?;
    let weights = WeightedIndex::new(mdp.thetas().iter().map(|t| t.weight))
        .map_err(|e| Error::InvalidModel(format!("hidden parameter weights: {e}")))?;
    (0..n_episodes)
        .map(|_| {
            let theta = weights.sample(rng);
            rollout_one(mdp, pi, theta, horizon, rng)
        })
        .collect()
}

/// One episode under a fixed hidden parameter.
pub fn rollout_one<R: Rng + ?Sized>(
    mdp: &HipMdp,
    pi: &TabularPolicy,
    theta: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    let dyn_ = mdp.dynamics(theta)?;
    let mut s = StateId(sample_index(mdp.rho0().mass().iter().copied(), rng));
    let mut steps = Vec::new();
    if dyn_.is_terminal(s) {
        return Ok(Trajectory { theta, steps });
    }
    for _ in 0..horizon {
        let a = ActionId(sample_index(pi.row(s).iter().copied(), rng));
        let row = dyn_.successors(s, a);
        let next = if row.len() == 1 {
            row[0].0
        } else {
            row[sample_index(row.iter().map(|&(_, p)| p), rng)].0
        };
        let terminal = dyn_.is_terminal(next);
        steps.push(Step {
            state: s,
            action: a,
            reward: mdp.reward(theta, s, a, next),
            next_state: next,
            terminal,
        });
        if terminal {
            break;
        }
        s = next;
    }
    Ok(Trajectory { theta, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lavaworld::{build_hipmdp, LavaLayout};
    use crate::mdp::optimal_policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_policy_repeats_exactly() {
        let mdp = build_hipmdp(&LavaLayout::canonical()).unwrap();
        let (pi, _) = optimal_policy(&mdp, 1, 1e-10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = rollout_one(&mdp, &pi, 1, 200, &mut rng).unwrap();
        let b = rollout_one(&mdp, &pi, 1, 200, &mut rng).unwrap();
        assert_eq!(a, b);
        assert!(a.terminated());
    }

    #[test]
    fn horizon_truncates() {
        let mdp = build_hipmdp(&LavaLayout::canonical()).unwrap();
        // Always "up": bumps the top wall forever.
        let pi = TabularPolicy::deterministic(4, &vec![ActionId(0); mdp.num_states()]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = rollout_one(&mdp, &pi, 0, 17, &mut rng).unwrap();
        assert_eq!(t.len(), 17);
        assert!(!t.terminated());
        assert!((t.undiscounted_return() + 17.0 * 0.02).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_batch() {
        let mdp = build_hipmdp(&LavaLayout::canonical()).unwrap();
        let pi = TabularPolicy::uniform(mdp.num_states(), 4);
        let run = |seed| rollout(&mdp, &pi, 20, 200, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}
