//! Exact dynamic-programming primitives: optimal values, policy values,
//! discounted occupancy and expected return.

use nalgebra::{DMatrix, DVector};

use super::model::{ActionId, HipMdp, StateDistribution, StateId, TabularPolicy, ValueTable};
use crate::config::Tolerances;
use crate::error::{Error, Result};

/// Two actions whose Q-values differ by less than this are treated as tied
/// when extracting a greedy policy, so the lowest index wins.
const GREEDY_TIE_EPS: f64 = 1e-12;

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("tolerance {tol} must be positive")))
    }
}

/// One Bellman backup `Σ_{s'} T(s'|s,a) [r + γ V(s')]`.
#[inline]
fn backup(mdp: &HipMdp, theta: usize, v: &[f64], s: StateId, a: ActionId) -> f64 {
    let dyn_ = &mdp.dynamics(theta).expect("theta checked by caller");
    let gamma = mdp.gamma();
    dyn_.successors(s, a)
        .iter()
        .map(|&(next, p)| p * (mdp.reward(theta, s, a, next) + gamma * v[next.0]))
        .sum()
}

fn q_table(mdp: &HipMdp, theta: usize, v: &[f64]) -> Vec<f64> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut q = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            q[s * na + a] = backup(mdp, theta, v, StateId(s), ActionId(a));
        }
    }
    q
}

/// Optimal values `V*` and `Q*` under `T_θ`, starting from zero.
pub fn value_iteration(mdp: &HipMdp, theta: usize, tol: f64) -> Result<ValueTable> {
    value_iteration_from(mdp, theta, tol, &vec![0.0; mdp.num_states()])
}

/// Value iteration warm-started from `init`. The returned table satisfies
/// `max_s |V(s) - max_a Q(s,a)| < tol`, where `Q` is the backup of `V`.
pub fn value_iteration_from(
    mdp: &HipMdp,
    theta: usize,
    tol: f64,
    init: &[f64],
) -> Result<ValueTable> {
    check_tol(tol)?;
    mdp.theta(theta)?;
    if init.len() != mdp.num_states() {
        return Err(Error::InvalidModel(
            "initial value vector length mismatch".into(),
        ));
    }
    let cap = Tolerances::DEFAULT.max_value_iterations;
    let na = mdp.num_actions();
    let mut v = init.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..cap {
        let q = q_table(mdp, theta, &v);
        let next: Vec<f64> = q
            .chunks_exact(na)
            .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        residual = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual < tol {
            return Ok(ValueTable {
                v,
                q: Some(q),
                residual,
            });
        }
        v = next;
    }
    Err(Error::NotConverged {
        what: "value iteration",
        iterations: cap,
        residual,
    })
}

/// Deterministic policy greedy with respect to the Q-values of `values`
/// (recomputed from `v` if absent). Near-ties resolve to the lowest action.
pub fn greedy_policy(mdp: &HipMdp, theta: usize, values: &ValueTable) -> Result<TabularPolicy> {
    mdp.theta(theta)?;
    let na = mdp.num_actions();
    let q = match &values.q {
        Some(q) => q.clone(),
        None => q_table(mdp, theta, &values.v),
    };
    let actions: Vec<ActionId> = q
        .chunks_exact(na)
        .map(|row| {
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ActionId(
                row.iter()
                    .position(|&x| x >= best - GREEDY_TIE_EPS)
                    .unwrap_or(0),
            )
        })
        .collect();
    Ok(TabularPolicy::deterministic(na, &actions))
}

/// Optimal deterministic policy of `T_θ` together with its values.
pub fn optimal_policy(mdp: &HipMdp, theta: usize, tol: f64) -> Result<(TabularPolicy, ValueTable)> {
    let values = value_iteration(mdp, theta, tol)?;
    let pi = greedy_policy(mdp, theta, &values)?;
    Ok((pi, values))
}

/// Dense `P_π` and `r_π` for the Markov chain induced by `π` under `T_θ`.
fn induced_chain(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let dyn_ = mdp.dynamics(theta)?;
    let ns = mdp.num_states();
    let mut p = DMatrix::zeros(ns, ns);
    let mut r = DVector::zeros(ns);
    for s in 0..ns {
        for (a, &w) in pi.row(StateId(s)).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &(next, prob) in dyn_.successors(StateId(s), ActionId(a)) {
                p[(s, next.0)] += w * prob;
                r[s] += w * prob * mdp.reward(theta, StateId(s), ActionId(a), next);
            }
        }
    }
    Ok((p, r))
}

fn policy_backup(mdp: &HipMdp, theta: usize, pi: &TabularPolicy, v: &[f64]) -> Vec<f64> {
    (0..mdp.num_states())
        .map(|s| {
            pi.row(StateId(s))
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(a, &w)| w * backup(mdp, theta, v, StateId(s), ActionId(a)))
                .sum()
        })
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `V^π` and `Q^π` under `T_θ` with Bellman residual below `tol`.
pub fn policy_evaluation(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    tol: f64,
) -> Result<ValueTable> {
    policy_evaluation_with(mdp, theta, pi, tol, &Tolerances::DEFAULT)
}

pub fn policy_evaluation_with(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    tol: f64,
    tols: &Tolerances,
) -> Result<ValueTable> {
    check_tol(tol)?;
    mdp.check_policy(pi)?;
    let ns = mdp.num_states();
    let mut v = if ns <= tols.direct_solve_cap {
        let (p, r) = induced_chain(mdp, theta, pi)?;
        let a = DMatrix::identity(ns, ns) - p * mdp.gamma();
        a.lu()
            .solve(&r)
            .ok_or(Error::Singular("policy evaluation"))?
            .as_slice()
            .to_vec()
    } else {
        mdp.theta(theta)?;
        vec![0.0; ns]
    };
    // Sweeps polish the direct solution and drive the iterative path.
    let mut residual = f64::INFINITY;
    for _ in 0..tols.max_value_iterations {
        let next = policy_backup(mdp, theta, pi, &v);
        residual = max_abs_diff(&next, &v);
        if residual < tol {
            let q = q_table(mdp, theta, &v);
            return Ok(ValueTable {
                v,
                q: Some(q),
                residual,
            });
        }
        v = next;
    }
    Err(Error::NotConverged {
        what: "policy evaluation",
        iterations: tols.max_value_iterations,
        residual,
    })
}

/// Discounted state occupancy `d(s) = (1-γ) Σ_t γ^t P(s_t = s)`.
pub fn occupancy(mdp: &HipMdp, theta: usize, pi: &TabularPolicy) -> Result<StateDistribution> {
    occupancy_with(mdp, theta, pi, &Tolerances::DEFAULT)
}

/// Occupancy with explicit solver settings. Systems up to
/// `tols.direct_solve_cap` states are solved by LU decomposition, larger ones
/// by damped Richardson iteration on the same fixed point.
pub fn occupancy_with(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    tols: &Tolerances,
) -> Result<StateDistribution> {
    mdp.check_policy(pi)?;
    let ns = mdp.num_states();
    let gamma = mdp.gamma();
    let source: Vec<f64> = mdp
        .rho0()
        .mass()
        .iter()
        .map(|m| (1.0 - gamma) * m)
        .collect();
    let mut d = if ns <= tols.direct_solve_cap {
        let (p, _) = induced_chain(mdp, theta, pi)?;
        let a = DMatrix::identity(ns, ns) - p.transpose() * gamma;
        a.lu()
            .solve(&DVector::from_column_slice(&source))
            .ok_or(Error::Singular("occupancy"))?
            .as_slice()
            .to_vec()
    } else {
        richardson(mdp, theta, pi, &source, tols)?
    };
    for m in &mut d {
        // LU round-off can leave entries a few ulps below zero.
        if *m < 0.0 && *m > -1e-12 {
            *m = 0.0;
        }
    }
    StateDistribution::new(d, tols)
}

/// Applies `γ P_π^T` to `d`.
fn push_forward(mdp: &HipMdp, theta: usize, pi: &TabularPolicy, d: &[f64]) -> Vec<f64> {
    let dyn_ = mdp.dynamics(theta).expect("theta checked by caller");
    let gamma = mdp.gamma();
    let mut out = vec![0.0; d.len()];
    for (s, &mass) in d.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (a, &w) in pi.row(StateId(s)).iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for &(next, p) in dyn_.successors(StateId(s), ActionId(a)) {
                out[next.0] += gamma * mass * w * p;
            }
        }
    }
    out
}

fn richardson(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    source: &[f64],
    tols: &Tolerances,
) -> Result<Vec<f64>> {
    mdp.theta(theta)?;
    let omega = tols.richardson_damping;
    let mut d = source.to_vec();
    let mut residual = f64::INFINITY;
    for _ in 0..tols.max_richardson_iterations {
        let pushed = push_forward(mdp, theta, pi, &d);
        let target: Vec<f64> = source.iter().zip(&pushed).map(|(b, p)| b + p).collect();
        residual = max_abs_diff(&target, &d);
        if residual < tols.richardson_residual {
            return Ok(target);
        }
        for (x, t) in d.iter_mut().zip(&target) {
            *x = (1.0 - omega) * *x + omega * t;
        }
    }
    Err(Error::NotConverged {
        what: "occupancy iteration",
        iterations: tols.max_richardson_iterations,
        residual,
    })
}

/// Largest per-state violation of `d = (1-γ)ρ0 + γ P_π^T d`.
pub fn occupancy_residual(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    d: &StateDistribution,
) -> Result<f64> {
    mdp.check_policy(pi)?;
    mdp.theta(theta)?;
    let gamma = mdp.gamma();
    let pushed = push_forward(mdp, theta, pi, d.mass());
    Ok(mdp
        .rho0()
        .mass()
        .iter()
        .zip(&pushed)
        .zip(d.mass())
        .map(|((r, p), x)| ((1.0 - gamma) * r + p - x).abs())
        .fold(0.0, f64::max))
}

/// `η_θ(π) = E_{s~ρ0} V^π_θ(s)`.
pub fn expected_return(mdp: &HipMdp, theta: usize, pi: &TabularPolicy) -> Result<f64> {
    let values = policy_evaluation(mdp, theta, pi, Tolerances::DEFAULT.bellman)?;
    Ok(mdp
        .rho0()
        .mass()
        .iter()
        .zip(&values.v)
        .map(|(m, v)| m * v)
        .sum())
}

/// Return averaged over the hidden-parameter weights.
pub fn expected_return_averaged(mdp: &HipMdp, pi: &TabularPolicy) -> Result<f64> {
    mdp.thetas()
        .iter()
        .map(|t| Ok(t.weight * expected_return(mdp, t.index, pi)?))
        .sum()
}

/// Occupancy form of the return: `Σ d(s) π(a|s) T(s'|s,a) r(s,a,s') / (1-γ)`.
pub fn return_from_occupancy(
    mdp: &HipMdp,
    theta: usize,
    pi: &TabularPolicy,
    d: &StateDistribution,
) -> Result<f64> {
    let dyn_ = mdp.dynamics(theta)?;
    let mut total = 0.0;
    for (s, &mass) in d.mass().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (a, &w) in pi.row(StateId(s)).iter().enumerate() {
            for &(next, p) in dyn_.successors(StateId(s), ActionId(a)) {
                total += mass * w * p * mdp.reward(theta, StateId(s), ActionId(a), next);
            }
        }
    }
    Ok(total / (1.0 - mdp.gamma()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{HiddenParam, RewardTable, TabularDynamics};
    use approx::assert_abs_diff_eq;

    const T: Tolerances = Tolerances::DEFAULT;

    fn single(
        rows: Vec<Vec<(StateId, f64)>>,
        terminal: Vec<bool>,
        na: usize,
        rewards: Vec<(usize, usize, usize, f64)>,
        gamma: f64,
    ) -> HipMdp {
        let ns = terminal.len();
        let dynamics = TabularDynamics::new(ns, na, rows, terminal, &T).unwrap();
        let rewards = RewardTable::from_triples(
            ns,
            na,
            rewards
                .into_iter()
                .map(|(s, a, n, r)| (StateId(s), ActionId(a), StateId(n), r)),
            0.0,
        )
        .unwrap();
        let theta = HiddenParam {
            index: 0,
            weight: 1.0,
            label: "only".into(),
        };
        HipMdp::new(
            vec![theta],
            vec![dynamics],
            rewards,
            gamma,
            StateDistribution::point(ns, StateId(0)),
            &T,
        )
        .unwrap()
    }

    #[test]
    fn single_state_zero_reward() {
        let mdp = single(vec![vec![(StateId(0), 1.0)]], vec![false], 1, vec![], 0.9);
        let vt = value_iteration(&mdp, 0, 1e-10).unwrap();
        assert_eq!(vt.v, vec![0.0]);
    }

    #[test]
    fn chain_to_absorbing_goal() {
        let mdp = single(
            vec![vec![(StateId(1), 1.0)], vec![(StateId(1), 1.0)]],
            vec![false, true],
            1,
            vec![(0, 0, 1, 1.0), (1, 0, 1, 5.0)],
            0.99,
        );
        let vt = value_iteration(&mdp, 0, 1e-10).unwrap();
        assert_abs_diff_eq!(vt.v[0], 1.0, epsilon = 1e-12);
        // terminal reward entries are masked
        assert_eq!(vt.v[1], 0.0);
    }

    #[test]
    fn symmetric_bandit_uniform_is_zero() {
        let mdp = single(
            vec![
                vec![(StateId(1), 1.0)],
                vec![(StateId(1), 1.0)],
                vec![(StateId(1), 1.0)],
                vec![(StateId(1), 1.0)],
            ],
            vec![false, true],
            2,
            vec![(0, 0, 1, 1.0), (0, 1, 1, -1.0)],
            0.9,
        );
        let pi = TabularPolicy::uniform(2, 2);
        let vt = policy_evaluation(&mdp, 0, &pi, 1e-12).unwrap();
        assert_abs_diff_eq!(vt.v[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn two_cycle_occupancy() {
        let mdp = single(
            vec![vec![(StateId(1), 1.0)], vec![(StateId(0), 1.0)]],
            vec![false, false],
            1,
            vec![],
            0.5,
        );
        let pi = TabularPolicy::uniform(2, 1);
        let d = occupancy(&mdp, 0, &pi).unwrap();
        assert_abs_diff_eq!(d.mass()[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.mass()[1], 1.0 / 3.0, epsilon = 1e-12);
        let iterative = occupancy_with(
            &mdp,
            0,
            &pi,
            &Tolerances {
                direct_solve_cap: 0,
                ..T
            },
        )
        .unwrap();
        assert!(d.total_variation(&iterative) < 1e-9);
    }

    #[test]
    fn absorbing_start_occupancy() {
        let mdp = single(vec![vec![(StateId(0), 1.0)]], vec![true], 1, vec![], 0.99);
        let d = occupancy(&mdp, 0, &TabularPolicy::uniform(1, 1)).unwrap();
        assert_abs_diff_eq!(d.mass()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn greedy_reaches_optimal_value() {
        let mdp = single(
            vec![
                vec![(StateId(1), 1.0)],
                vec![(StateId(2), 1.0)],
                vec![(StateId(0), 1.0)],
                vec![(StateId(2), 1.0)],
                vec![(StateId(2), 1.0)],
                vec![(StateId(2), 1.0)],
            ],
            vec![false, false, true],
            2,
            vec![
                (0, 0, 1, -0.1),
                (0, 1, 2, 0.5),
                (1, 0, 0, 0.3),
                (1, 1, 2, 1.0),
            ],
            0.9,
        );
        let tol = 1e-10;
        let (pi, vstar) = optimal_policy(&mdp, 0, tol).unwrap();
        let vpi = policy_evaluation(&mdp, 0, &pi, tol).unwrap();
        for (a, b) in vpi.v.iter().zip(&vstar.v) {
            assert!((a - b).abs() <= 10.0 * tol);
        }
        let again = value_iteration_from(&mdp, 0, tol, &vstar.v).unwrap();
        assert!(max_abs_diff(&again.v, &vstar.v) <= tol);
    }

    #[test]
    fn rejects_bad_tolerance_and_theta() {
        let mdp = single(vec![vec![(StateId(0), 1.0)]], vec![false], 1, vec![], 0.9);
        assert!(matches!(
            value_iteration(&mdp, 0, 0.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            value_iteration(&mdp, 3, 1e-9),
            Err(Error::ThetaOutOfRange(3))
        ));
    }
}
