use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionId(pub usize);

impl std::fmt::Display for StateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl std::fmt::Display for ActionId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "a{}", self.0)
    }
}

/// One member of the hidden-parameter space together with its sampling weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenParam {
    pub index: usize,
    pub weight: f64,
    #[serde(default)]
    pub label: String,
}

/// Transition kernel `T(s'|s,a)` for one hidden parameter, stored as sparse rows.
///
/// Terminal states are absorbing: every action maps them back onto themselves
/// with probability one.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDynamics {
    num_states: usize,
    num_actions: usize,
    rows: Vec<Vec<(StateId, f64)>>,
    terminal: Vec<bool>,
}

impl TabularDynamics {
    /// Builds a kernel from per-(s, a) successor lists. Entries with zero
    /// probability are dropped and duplicate successors are merged.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        rows: Vec<Vec<(StateId, f64)>>,
        terminal: Vec<bool>,
        tol: &Tolerances,
    ) -> Result<Self> {
        if rows.len() != num_states * num_actions {
            return Err(Error::InvalidModel(format!(
                "expected {} transition rows, got {}",
                num_states * num_actions,
                rows.len()
            )));
        }
        if terminal.len() != num_states {
            return Err(Error::InvalidModel("terminal flag count mismatch".into()));
        }
        let mut clean = Vec::with_capacity(rows.len());
        for (idx, mut row) in rows.into_iter().enumerate() {
            let (s, a) = (idx / num_actions, idx % num_actions);
            row.sort_by_key(|&(next, _)| next);
            let mut merged: Vec<(StateId, f64)> = Vec::with_capacity(row.len());
            for (next, p) in row {
                if next.0 >= num_states {
                    return Err(Error::StateOutOfRange(next.0));
                }
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "T({next}|s{s},a{a}) = {p} is not a probability"
                    )));
                }
                match merged.last_mut() {
                    Some(last) if last.0 == next => last.1 += p,
                    _ => merged.push((next, p)),
                }
            }
            merged.retain(|&(_, p)| p > 0.0);
            let total: f64 = merged.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > tol.row_sum {
                return Err(Error::InvalidModel(format!(
                    "row (s{s}, a{a}) sums to {total}"
                )));
            }
            if terminal[s] && !(merged.len() == 1 && merged[0].0 == StateId(s)) {
                return Err(Error::InvalidModel(format!(
                    "terminal state s{s} must self-loop with probability 1"
                )));
            }
            clean.push(merged);
        }
        Ok(Self {
            num_states,
            num_actions,
            rows: clean,
            terminal,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn successors(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.rows[s.0 * self.num_actions + a.0]
    }

    pub fn prob(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        let row = self.successors(s, a);
        row.binary_search_by_key(&next, |&(n, _)| n)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    #[inline]
    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal[s.0]
    }

    pub fn terminal_flags(&self) -> &[bool] {
        &self.terminal
    }

    pub fn is_deterministic(&self) -> bool {
        self.rows.iter().all(|row| row.len() == 1)
    }

    /// Iterates over every positive-probability triple `(s, a, s', p)`.
    pub fn transitions(&self) -> impl Iterator<Item = (StateId, ActionId, StateId, f64)> + '_ {
        self.rows.iter().enumerate().flat_map(move |(idx, row)| {
            let s = StateId(idx / self.num_actions);
            let a = ActionId(idx % self.num_actions);
            row.iter().map(move |&(next, p)| (s, a, next, p))
        })
    }
}

/// Shared reward function `r(s, a, s')`. Triples absent from the table are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    num_states: usize,
    num_actions: usize,
    entries: Vec<Vec<(StateId, f64)>>,
    r_max: f64,
    lipschitz_action: f64,
}

impl RewardTable {
    pub fn from_triples(
        num_states: usize,
        num_actions: usize,
        triples: impl IntoIterator<Item = (StateId, ActionId, StateId, f64)>,
        lipschitz_action: f64,
    ) -> Result<Self> {
        if !(lipschitz_action >= 0.0) || !lipschitz_action.is_finite() {
            return Err(Error::InvalidModel(format!(
                "action-Lipschitz coefficient {lipschitz_action} must be finite and non-negative"
            )));
        }
        let mut entries = vec![Vec::new(); num_states * num_actions];
        for (s, a, next, r) in triples {
            if s.0 >= num_states || next.0 >= num_states {
                return Err(Error::StateOutOfRange(s.0.max(next.0)));
            }
            if a.0 >= num_actions {
                return Err(Error::InvalidModel(format!("action {a} out of range")));
            }
            if !r.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "reward r({s},{a},{next}) = {r}"
                )));
            }
            entries[s.0 * num_actions + a.0].push((next, r));
        }
        for row in &mut entries {
            row.sort_by_key(|&(n, _)| n);
            let before = row.len();
            row.dedup_by_key(|&mut (n, _)| n);
            if row.len() != before {
                return Err(Error::InvalidModel("duplicate reward triple".into()));
            }
        }
        let r_max = entries
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, &(_, r)| acc.max(r.abs()));
        Ok(Self {
            num_states,
            num_actions,
            entries,
            r_max,
            lipschitz_action,
        })
    }

    #[inline]
    pub fn get(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        let row = &self.entries[s.0 * self.num_actions + a.0];
        row.binary_search_by_key(&next, |&(n, _)| n)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    }

    /// Largest absolute reward stored in the table.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn lipschitz_action(&self) -> f64 {
        self.lipschitz_action
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn triples(&self) -> impl Iterator<Item = (StateId, ActionId, StateId, f64)> + '_ {
        self.entries.iter().enumerate().flat_map(move |(idx, row)| {
            let s = StateId(idx / self.num_actions);
            let a = ActionId(idx % self.num_actions);
            row.iter().map(move |&(next, r)| (s, a, next, r))
        })
    }
}

/// Stochastic state-to-action map `π(a|s)`, row-major `|S| x |A|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        probs: Vec<f64>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let policy = Self {
            num_states,
            num_actions,
            probs,
        };
        policy.validate(tol)?;
        Ok(policy)
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self {
            num_states,
            num_actions,
            probs: vec![1.0 / num_actions as f64; num_states * num_actions],
        }
    }

    pub fn deterministic(num_actions: usize, actions: &[ActionId]) -> Self {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, a) in actions.iter().enumerate() {
            probs[s * num_actions + a.0] = 1.0;
        }
        Self {
            num_states: actions.len(),
            num_actions,
            probs,
        }
    }

    /// Softmax over per-state logits.
    pub fn softmax(num_states: usize, num_actions: usize, logits: &[f64]) -> Self {
        let mut probs = vec![0.0; num_states * num_actions];
        for s in 0..num_states {
            let row = &logits[s * num_actions..(s + 1) * num_actions];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let out = &mut probs[s * num_actions..(s + 1) * num_actions];
            let mut z = 0.0;
            for (o, &l) in out.iter_mut().zip(row) {
                *o = (l - max).exp();
                z += *o;
            }
            out.iter_mut().for_each(|o| *o /= z);
        }
        Self {
            num_states,
            num_actions,
            probs,
        }
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        if self.probs.len() != self.num_states * self.num_actions {
            return Err(Error::InvalidPolicy("shape mismatch".into()));
        }
        for s in 0..self.num_states {
            let row = self.row(StateId(s));
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidPolicy(format!(
                    "negative or non-finite entry in row {s}"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > tol.row_sum {
                return Err(Error::InvalidPolicy(format!("row {s} sums to {total}")));
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: StateId, a: ActionId) -> f64 {
        self.probs[s.0 * self.num_actions + a.0]
    }

    #[inline]
    pub fn row(&self, s: StateId) -> &[f64] {
        &self.probs[s.0 * self.num_actions..(s.0 + 1) * self.num_actions]
    }

    /// Most probable action; ties resolve to the lowest index.
    pub fn greedy_action(&self, s: StateId) -> ActionId {
        let row = self.row(s);
        let mut best = 0;
        for (a, &p) in row.iter().enumerate() {
            if p > row[best] {
                best = a;
            }
        }
        ActionId(best)
    }

    pub fn greedy(&self) -> Self {
        let actions: Vec<_> = (0..self.num_states)
            .map(|s| self.greedy_action(StateId(s)))
            .collect();
        Self::deterministic(self.num_actions, &actions)
    }
}

/// A probability vector over states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateDistribution {
    mass: Vec<f64>,
}

impl StateDistribution {
    pub fn new(mass: Vec<f64>, tol: &Tolerances) -> Result<Self> {
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidDistribution(
                "negative or non-finite mass".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > tol.distribution_sum {
            return Err(Error::InvalidDistribution(format!("mass sums to {total}")));
        }
        Ok(Self { mass })
    }

    /// Normalizes a non-negative vector; fails if it carries no mass.
    pub fn normalized(mut mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(Error::InvalidDistribution(
                "negative or non-finite mass".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("zero total mass".into()));
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self { mass })
    }

    pub fn point(num_states: usize, s: StateId) -> Self {
        let mut mass = vec![0.0; num_states];
        mass[s.0] = 1.0;
        Self { mass }
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn get(&self, s: StateId) -> f64 {
        self.mass[s.0]
    }

    pub fn support(&self) -> impl Iterator<Item = StateId> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(s, _)| StateId(s))
    }

    pub fn total_variation(&self, other: &StateDistribution) -> f64 {
        0.5 * self
            .mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// State values, optionally with action values (`|S| x |A|`, row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub v: Vec<f64>,
    pub q: Option<Vec<f64>>,
    /// Bellman residual of `v` at return time.
    pub residual: f64,
}

impl ValueTable {
    pub fn value(&self, s: StateId) -> f64 {
        self.v[s.0]
    }

    pub fn q_row(&self, s: StateId, num_actions: usize) -> Option<&[f64]> {
        self.q
            .as_ref()
            .map(|q| &q[s.0 * num_actions..(s.0 + 1) * num_actions])
    }
}

/// A tabular hidden-parameter MDP `(S, A, Θ, T, r, γ, ρ0)`.
///
/// The reward table is shared by all members of the family; only the kernel
/// varies with θ. Transitions leaving a state that is terminal under the
/// active θ carry zero reward regardless of the table (see [`HipMdp::reward`]).
#[derive(Debug, Clone, PartialEq)]
pub struct HipMdp {
    num_states: usize,
    num_actions: usize,
    thetas: Vec<HiddenParam>,
    dynamics: Vec<TabularDynamics>,
    rewards: RewardTable,
    gamma: f64,
    rho0: StateDistribution,
    state_labels: Option<Vec<String>>,
    state_features: Option<Vec<Vec<f64>>>,
}

impl HipMdp {
    pub fn new(
        thetas: Vec<HiddenParam>,
        dynamics: Vec<TabularDynamics>,
        rewards: RewardTable,
        gamma: f64,
        rho0: StateDistribution,
        tol: &Tolerances,
    ) -> Result<Self> {
        let first = dynamics.first().ok_or_else(|| {
            Error::InvalidModel("at least one hidden parameter is required".into())
        })?;
        let (num_states, num_actions) = (first.num_states(), first.num_actions());
        if num_states == 0 || num_actions == 0 {
            return Err(Error::InvalidModel("empty state or action space".into()));
        }
        if thetas.len() != dynamics.len() {
            return Err(Error::InvalidModel(
                "one kernel per hidden parameter is required".into(),
            ));
        }
        if dynamics
            .iter()
            .any(|d| d.num_states() != num_states || d.num_actions() != num_actions)
        {
            return Err(Error::InvalidModel("kernels disagree on |S| or |A|".into()));
        }
        if rewards.num_states() != num_states || rewards.num_actions() != num_actions {
            return Err(Error::InvalidModel("reward table shape mismatch".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidModel(format!(
                "discount {gamma} must lie in (0, 1)"
            )));
        }
        if rho0.len() != num_states {
            return Err(Error::InvalidModel(
                "initial distribution length mismatch".into(),
            ));
        }
        StateDistribution::new(
            rho0.mass().to_vec(),
            &Tolerances {
                distribution_sum: tol.row_sum,
                ..*tol
            },
        )?;
        for (i, t) in thetas.iter().enumerate() {
            if t.index != i {
                return Err(Error::InvalidModel(format!(
                    "hidden parameter {i} has index {}",
                    t.index
                )));
            }
            if !(t.weight >= 0.0) || !t.weight.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "weight of θ{i} is {}",
                    t.weight
                )));
            }
        }
        let total: f64 = thetas.iter().map(|t| t.weight).sum();
        if (total - 1.0).abs() > tol.row_sum {
            return Err(Error::InvalidModel(format!(
                "hidden parameter weights sum to {total}"
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            thetas,
            dynamics,
            rewards,
            gamma,
            rho0,
            state_labels: None,
            state_features: None,
        })
    }

    pub fn with_state_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.num_states {
            return Err(Error::InvalidModel("state label count mismatch".into()));
        }
        self.state_labels = Some(labels);
        Ok(self)
    }

    pub fn with_state_features(mut self, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != self.num_states {
            return Err(Error::InvalidModel("state feature count mismatch".into()));
        }
        self.state_features = Some(features);
        Ok(self)
    }

    /// Same family with a different reward table (used by reward augmentation).
    pub fn with_rewards(&self, rewards: RewardTable) -> Result<Self> {
        if rewards.num_states() != self.num_states || rewards.num_actions() != self.num_actions {
            return Err(Error::InvalidModel("reward table shape mismatch".into()));
        }
        Ok(Self {
            rewards,
            ..self.clone()
        })
    }

    /// Restricts the family to a subset of hidden parameters, renormalizing weights.
    pub fn restrict_thetas(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(Error::InvalidModel(
                "cannot restrict to an empty parameter set".into(),
            ));
        }
        let total: f64 = keep
            .iter()
            .map(|&i| self.theta(i).map(|t| t.weight))
            .sum::<Result<f64>>()?;
        let uniform = total <= 0.0;
        let thetas = keep
            .iter()
            .enumerate()
            .map(|(new, &old)| HiddenParam {
                index: new,
                weight: if uniform {
                    1.0 / keep.len() as f64
                } else {
                    self.thetas[old].weight / total
                },
                label: self.thetas[old].label.clone(),
            })
            .collect();
        let dynamics = keep.iter().map(|&i| self.dynamics[i].clone()).collect();
        Ok(Self {
            thetas,
            dynamics,
            ..self.clone()
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_thetas(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[HiddenParam] {
        &self.thetas
    }

    pub fn theta(&self, theta: usize) -> Result<&HiddenParam> {
        self.thetas.get(theta).ok_or(Error::ThetaOutOfRange(theta))
    }

    pub fn dynamics(&self, theta: usize) -> Result<&TabularDynamics> {
        self.dynamics
            .get(theta)
            .ok_or(Error::ThetaOutOfRange(theta))
    }

    pub fn rewards(&self) -> &RewardTable {
        &self.rewards
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho0(&self) -> &StateDistribution {
        &self.rho0
    }

    pub fn state_labels(&self) -> Option<&[String]> {
        self.state_labels.as_deref()
    }

    pub fn state_features(&self) -> Option<&[Vec<f64>]> {
        self.state_features.as_deref()
    }

    pub fn state_label(&self, s: StateId) -> String {
        self.state_labels
            .as_ref()
            .map(|l| l[s.0].clone())
            .unwrap_or_else(|| s.to_string())
    }

    /// Effective reward of a transition under θ: zero when `s` is terminal,
    /// otherwise the shared table entry.
    #[inline]
    pub fn reward(&self, theta: usize, s: StateId, a: ActionId, next: StateId) -> f64 {
        if self.dynamics[theta].is_terminal(s) {
            0.0
        } else {
            self.rewards.get(s, a, next)
        }
    }

    pub fn check_policy(&self, pi: &TabularPolicy) -> Result<()> {
        if pi.num_states() != self.num_states || pi.num_actions() != self.num_actions {
            return Err(Error::InvalidPolicy(format!(
                "policy is {}x{}, model is {}x{}",
                pi.num_states(),
                pi.num_actions(),
                self.num_states,
                self.num_actions
            )));
        }
        pi.validate(&Tolerances::DEFAULT)
    }
}
