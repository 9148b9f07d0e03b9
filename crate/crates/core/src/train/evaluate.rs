use rand::Rng;
use serde::{Deserialize, Serialize};

use super::rollout::rollout_one;
use crate::error::{Error, Result};
use crate::mdp::{ActionId, HipMdp, StateId, TabularPolicy};

/// Whether evaluation follows the policy's samples or its most likely action.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    #[default]
    Stochastic,
    Greedy,
}

fn acting_policy(pi: &TabularPolicy, mode: EvalMode) -> TabularPolicy {
    match mode {
        EvalMode::Stochastic => pi.clone(),
        EvalMode::Greedy => pi.greedy(),
    }
}

/// Monte-Carlo mean undiscounted return per hidden parameter, `n_episodes` each.
pub fn evaluate_per_theta<R: Rng + ?Sized>(
    mdp: &HipMdp,
    pi: &TabularPolicy,
    n_episodes: usize,
    horizon: usize,
    mode: EvalMode,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n_episodes == 0 {
        return Err(Error::Config(
            "evaluation needs at least one episode".into(),
        ));
    }
    mdp.check_policy(pi)?;
    let acting = acting_policy(pi, mode);
    (0..mdp.num_thetas())
        .map(|t| {
            let mut total = 0.0;
            for _ in 0..n_episodes {
                total += rollout_one(mdp, &acting, t, horizon, rng)?.undiscounted_return();
            }
            Ok(total / n_episodes as f64)
        })
        .collect()
}

/// Expected undiscounted return over episodes truncated at `horizon`,
/// computed by propagating the state distribution forward.
pub fn exact_episodic_return(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    horizon: usize,
) -> Result<f64> {
    mdp.check_policy(pi)?;
    let dyn_ = mdp.dynamics(theta)?;
    let ns = mdp.num_states();
    let mut p: Vec<f64> = mdp
        .rho0()
        .mass()
        .iter()
        .enumerate()
        .map(|(s, &m)| if dyn_.is_terminal(StateId(s)) { 0.0 } else { m })
        .collect();
    let mut total = 0.0;
    for _ in 0..horizon {
        let mut next_p = vec![0.0; ns];
        for (s, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let s = StateId(s);
            for (a, &w) in pi.row(s).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                for &(n, prob) in dyn_.successors(s, ActionId(a)) {
                    let flow = mass * w * prob;
                    total += flow * mdp.reward(theta, s, ActionId(a), n);
                    if !dyn_.is_terminal(n) {
                        next_p[n.0] += flow;
                    }
                }
            }
        }
        p = next_p;
    }
    Ok(total)
}

/// [`exact_episodic_return`] for every hidden parameter.
pub fn exact_per_theta(
    mdp: &HipMdp,
    pi: &TabularPolicy,
    horizon: usize,
    mode: EvalMode,
) -> Result<Vec<f64>> {
    let acting = acting_policy(pi, mode);
    (0..mdp.num_thetas())
        .map(|t| exact_episodic_return(mdp, t, &acting, horizon))
        .collect()
}

/// θ-weighted mean of a per-θ table.
pub fn weighted_mean(mdp: &HipMdp, per_theta: &[f64]) -> f64 {
    mdp.thetas()
        .iter()
        .zip(per_theta)
        .map(|(t, r)| t.weight * r)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lavaworld::{build_hipmdp, LavaLayout};
    use crate::mdp::optimal_policy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_episodes_rejected() {
        let mdp = build_hipmdp(&LavaLayout::canonical()).unwrap();
        let pi = TabularPolicy::uniform(mdp.num_states(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(evaluate_per_theta(&mdp, &pi, 0, 200, EvalMode::Stochastic, &mut rng).is_err());
    }

    #[test]
    fn exact_matches_monte_carlo_for_uniform_policy() {
        let mdp = build_hipmdp(&LavaLayout::canonical()).unwrap();
        let pi = TabularPolicy::uniform(mdp.num_states(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mc =
            evaluate_per_theta(&mdp, &pi, 20_000, 200, EvalMode::Stochastic, &mut rng).unwrap();
        let exact = exact_per_theta(&mdp, &pi, 200, EvalMode::Stochastic).unwrap();
        for (a, b) in mc.iter().zip(&exact) {
            assert!((a - b).abs() < 0.02, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_is_worse_than_optimal_everywhere() {
        let mdp = build_hipmdp(&LavaLayout::canonical()).unwrap();
        let uniform = exact_per_theta(
            &mdp,
            &TabularPolicy::uniform(mdp.num_states(), 4),
            200,
            EvalMode::Stochastic,
        )
        .unwrap();
        for t in 0..mdp.num_thetas() {
            let (pi, _) = optimal_policy(&mdp, t, 1e-10).unwrap();
            assert!(exact_episodic_return(&mdp, t, &pi, 200).unwrap() > uniform[t]);
        }
    }
}
