use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{occupancy, ActionId, HipMdp, StateDistribution, StateId, TabularPolicy};

/// States reachable from the initial support under every hidden parameter.
///
/// A state has positive discounted occupancy under some policy exactly when
/// it is reachable in the positive-probability transition graph: a path of
/// length `t` is followed with positive probability by the deterministic
/// policy that picks its actions, and it contributes `γ^t > 0` mass. Graph
/// search therefore replaces the search over policies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessibleSet {
    pub members: BTreeSet<StateId>,
    pub per_theta_reachable: Vec<BTreeSet<StateId>>,
}

impl AccessibleSet {
    pub fn contains(&self, s: StateId) -> bool {
        self.members.contains(&s)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Membership as a dense boolean mask over `num_states`.
    pub fn mask(&self, num_states: usize) -> Vec<bool> {
        let mut mask = vec![false; num_states];
        for s in &self.members {
            mask[s.0] = true;
        }
        mask
    }
}

/// Breadth-first reachability from `supp(ρ0)` under `T_θ`.
pub fn reachable_states(mdp: &HipMdp, theta: usize) -> Result<BTreeSet<StateId>> {
    let dyn_ = mdp.dynamics(theta)?;
    let mut seen = vec![false; mdp.num_states()];
    let mut queue: VecDeque<StateId> = mdp.rho0().support().collect();
    for s in &queue {
        seen[s.0] = true;
    }
    while let Some(s) = queue.pop_front() {
        for a in 0..mdp.num_actions() {
            for &(next, _) in dyn_.successors(s, ActionId(a)) {
                if !seen[next.0] {
                    seen[next.0] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    Ok(seen
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(s, _)| StateId(s))
        .collect())
}

pub fn accessible_states(mdp: &HipMdp) -> AccessibleSet {
    let per_theta_reachable: Vec<BTreeSet<StateId>> = (0..mdp.num_thetas())
        .map(|t| reachable_states(mdp, t).expect("theta index in range"))
        .collect();
    let mut members = per_theta_reachable[0].clone();
    for other in &per_theta_reachable[1..] {
        members.retain(|s| other.contains(s));
    }
    AccessibleSet {
        members,
        per_theta_reachable,
    }
}

/// Restricts a distribution to `set` and renormalizes.
pub fn restrict_to(d: &StateDistribution, set: &AccessibleSet) -> Result<StateDistribution> {
    let masked: Vec<f64> = d
        .mass()
        .iter()
        .enumerate()
        .map(|(s, &m)| if set.contains(StateId(s)) { m } else { 0.0 })
        .collect();
    if masked.iter().sum::<f64>() <= 0.0 {
        return Err(Error::DegenerateSupport);
    }
    StateDistribution::normalized(masked)
}

/// Occupancy of `π` under `T_θ` restricted to the globally accessible states.
pub fn accessible_distribution(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
) -> Result<StateDistribution> {
    accessible_distribution_in(mdp, theta, pi, &accessible_states(mdp))
}

/// As [`accessible_distribution`] with a precomputed accessible set.
pub fn accessible_distribution_in(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    set: &AccessibleSet,
) -> Result<StateDistribution> {
    restrict_to(&occupancy(mdp, theta, pi)?, set)
}
