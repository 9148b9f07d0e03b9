//! Detour certificates between two members of a family.
//!
//! For every transition `(s, a, s')` of the first kernel the search looks for
//! a path from `s` to `s'` in the second kernel and scores it by the reward
//! discrepancy
//!
//! ```text
//! | Σ_{n=1}^{N-1} γ^{n-1} r(s_n, a_n, s_{n+1}) + (1 - γ^{N-1}) V*_1(s_0) |
//! ```
//!
//! where `s_0 = s`, `s_N = s'` and `V*_1` is optimal under the first kernel.

use std::collections::{BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::accessible::AccessibleSet;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::mdp::{value_iteration, ActionId, HipMdp, StateId};

pub const DEFAULT_M_MAX: usize = 8;

/// Which detour rewards enter the discrepancy sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscrepancyReading {
    /// Rewards of steps `1..N`, skipping the first step of the detour.
    #[default]
    SkipFirst,
    /// Rewards of steps `0..N-1`, skipping the last step of the detour.
    SkipLast,
}

/// Which transitions of the first kernel must be covered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum CertifyScope {
    /// Every transition leaving a non-terminal state.
    #[default]
    All,
    /// Only transitions whose endpoints both lie in the given set.
    Within(BTreeSet<StateId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub m_max: usize,
    pub reading: DiscrepancyReading,
    pub scope: CertifyScope,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            m_max: DEFAULT_M_MAX,
            reading: DiscrepancyReading::default(),
            scope: CertifyScope::All,
        }
    }
}

impl CertifyOptions {
    pub fn with_m_max(m_max: usize) -> Self {
        Self {
            m_max,
            ..Self::default()
        }
    }

    pub fn within(mut self, set: &AccessibleSet) -> Self {
        self.scope = CertifyScope::Within(set.members.clone());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub state: StateId,
    pub action: ActionId,
    pub next: StateId,
}

/// A detour in the second kernel that reproduces one transition of the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub transition: Transition,
    /// `s_0 .. s_N`, so `states.len() == actions.len() + 1`.
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
    pub discrepancy: f64,
}

impl Witness {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityCertificate {
    pub theta1: usize,
    pub theta2: usize,
    pub m_max: usize,
    pub reading: DiscrepancyReading,
    /// Longest detour used; at least 1.
    pub m: usize,
    /// Largest discrepancy over covered transitions.
    pub r_s: f64,
    pub feasible: bool,
    pub witnesses: Vec<Witness>,
    /// Transitions with no detour of length at most `m_max`.
    pub uncovered: Vec<Transition>,
}

impl AccessibilityCertificate {
    pub fn require_feasible(&self) -> Result<()> {
        match self.uncovered.first() {
            None => Ok(()),
            Some(t) => Err(Error::InfeasibleCertificate {
                state: t.state,
                action: t.action,
                next: t.next,
                m_max: self.m_max,
            }),
        }
    }
}

/// Certificates for every ordered pair of a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCertificate {
    pub m: usize,
    pub r_s: f64,
    pub feasible: bool,
    pub pairs: Vec<AccessibilityCertificate>,
}

impl FamilyCertificate {
    pub fn require_feasible(&self) -> Result<()> {
        self.pairs
            .iter()
            .try_for_each(AccessibilityCertificate::require_feasible)
    }

    pub fn pair(&self, theta1: usize, theta2: usize) -> Option<&AccessibilityCertificate> {
        self.pairs
            .iter()
            .find(|c| c.theta1 == theta1 && c.theta2 == theta2)
    }
}

pub fn certify_mrs(
    mdp: &HipMdp,
    theta1: usize,
    theta2: usize,
    m_max: usize,
) -> Result<AccessibilityCertificate> {
    certify_mrs_with(mdp, theta1, theta2, &CertifyOptions::with_m_max(m_max))
}

pub fn certify_mrs_with(
    mdp: &HipMdp,
    theta1: usize,
    theta2: usize,
    opts: &CertifyOptions,
) -> Result<AccessibilityCertificate> {
    if opts.m_max == 0 {
        return Err(Error::Config("m_max must be at least 1".into()));
    }
    let d1 = mdp.dynamics(theta1)?;
    mdp.dynamics(theta2)?;
    let v1 = value_iteration(mdp, theta1, Tolerances::DEFAULT.bellman)?.v;
    let search = DetourSearch::new(mdp, theta2, opts.m_max);

    // Terminal self-loops only encode absorption, so they carry no obligation.
    let transitions: Vec<Transition> = d1
        .transitions()
        .filter(|&(s, _, _, _)| !d1.is_terminal(s))
        .filter(|&(s, _, n, _)| match &opts.scope {
            CertifyScope::All => true,
            CertifyScope::Within(set) => set.contains(&s) && set.contains(&n),
        })
        .map(|(state, action, next, _)| Transition {
            state,
            action,
            next,
        })
        .collect();

    let results: Vec<Option<Witness>> = transitions
        .par_iter()
        .map(|&t| search.best_witness(t, v1[t.state.0], opts.reading))
        .collect();

    let mut witnesses = Vec::new();
    let mut uncovered = Vec::new();
    for (t, w) in transitions.into_iter().zip(results) {
        match w {
            Some(w) => witnesses.push(w),
            None => uncovered.push(t),
        }
    }
    let m = witnesses.iter().map(Witness::len).max().unwrap_or(1).max(1);
    let r_s = witnesses.iter().map(|w| w.discrepancy).fold(0.0, f64::max);
    Ok(AccessibilityCertificate {
        theta1,
        theta2,
        m_max: opts.m_max,
        reading: opts.reading,
        m,
        r_s,
        feasible: uncovered.is_empty(),
        witnesses,
        uncovered,
    })
}

/// Certifies every ordered pair `(θ1, θ2)`, including `θ1 == θ2`.
pub fn certify_family(mdp: &HipMdp, opts: &CertifyOptions) -> Result<FamilyCertificate> {
    let n = mdp.num_thetas();
    let pairs = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| certify_mrs_with(mdp, a, b, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(FamilyCertificate {
        m: pairs.iter().map(|c| c.m).max().unwrap_or(1),
        r_s: pairs.iter().map(|c| c.r_s).fold(0.0, f64::max),
        feasible: pairs.iter().all(|c| c.feasible),
        pairs,
    })
}

/// Shortest-path machinery over the positive-probability graph of one kernel.
struct DetourSearch<'a> {
    mdp: &'a HipMdp,
    theta: usize,
    m_max: usize,
    /// Predecessors of each state, deduplicated.
    reverse: Vec<Vec<StateId>>,
}

const UNREACHED: usize = usize::MAX;

impl<'a> DetourSearch<'a> {
    fn new(mdp: &'a HipMdp, theta: usize, m_max: usize) -> Self {
        let d = mdp.dynamics(theta).expect("theta checked by caller");
        let mut reverse = vec![Vec::new(); mdp.num_states()];
        for (s, _, n, _) in d.transitions() {
            reverse[n.0].push(s);
        }
        for preds in &mut reverse {
            preds.sort_unstable();
            preds.dedup();
        }
        Self {
            mdp,
            theta,
            m_max,
            reverse,
        }
    }

    /// Steps needed to reach `target` from every state, capped at `m_max`.
    fn distances_to(&self, target: StateId) -> Vec<usize> {
        let mut dist = vec![UNREACHED; self.mdp.num_states()];
        dist[target.0] = 0;
        let mut queue = VecDeque::from([target]);
        while let Some(u) = queue.pop_front() {
            if dist[u.0] >= self.m_max {
                continue;
            }
            for &p in &self.reverse[u.0] {
                if dist[p.0] == UNREACHED {
                    dist[p.0] = dist[u.0] + 1;
                    queue.push_back(p);
                }
            }
        }
        dist
    }

    /// Outgoing edges in lexicographic `(action, successor)` order.
    fn edges(&self, s: StateId) -> impl Iterator<Item = (ActionId, StateId)> + '_ {
        let d = self
            .mdp
            .dynamics(self.theta)
            .expect("theta checked by caller");
        (0..self.mdp.num_actions()).flat_map(move |a| {
            d.successors(s, ActionId(a))
                .iter()
                .map(move |&(n, _)| (ActionId(a), n))
        })
    }

    /// Minimum-discrepancy detour among the shortest ones (at least one step).
    fn best_witness(
        &self,
        t: Transition,
        v1_s: f64,
        reading: DiscrepancyReading,
    ) -> Option<Witness> {
        let dist = self.distances_to(t.next);
        let n = self
            .edges(t.state)
            .filter(|&(_, u)| dist[u.0] != UNREACHED)
            .map(|(_, u)| dist[u.0] + 1)
            .min()?;
        if n > self.m_max {
            return None;
        }
        let mut best: Option<Witness> = None;
        let mut states = vec![t.state];
        let mut actions = Vec::with_capacity(n);
        self.enumerate(
            &dist,
            t,
            n,
            v1_s,
            reading,
            &mut states,
            &mut actions,
            &mut best,
        );
        best
    }

    #[allow(clippy::too_many_arguments)]
    fn enumerate(
        &self,
        dist: &[usize],
        t: Transition,
        n: usize,
        v1_s: f64,
        reading: DiscrepancyReading,
        states: &mut Vec<StateId>,
        actions: &mut Vec<ActionId>,
        best: &mut Option<Witness>,
    ) {
        let depth = actions.len();
        if depth == n {
            let value = self.discrepancy(states, actions, v1_s, reading);
            if best.as_ref().map_or(true, |b| value < b.discrepancy) {
                *best = Some(Witness {
                    transition: t,
                    states: states.clone(),
                    actions: actions.clone(),
                    discrepancy: value,
                });
            }
            return;
        }
        let here = *states.last().expect("path is never empty");
        let remaining = n - depth - 1;
        for (a, u) in self.edges(here) {
            if dist[u.0] != remaining {
                continue;
            }
            states.push(u);
            actions.push(a);
            self.enumerate(dist, t, n, v1_s, reading, states, actions, best);
            states.pop();
            actions.pop();
        }
    }

    fn discrepancy(
        &self,
        states: &[StateId],
        actions: &[ActionId],
        v1_s: f64,
        reading: DiscrepancyReading,
    ) -> f64 {
        let gamma = self.mdp.gamma();
        let n = actions.len();
        let step = |k: usize| {
            self.mdp
                .reward(self.theta, states[k], actions[k], states[k + 1])
        };
        let sum: f64 = match reading {
            DiscrepancyReading::SkipFirst => {
                (1..n).map(|k| gamma.powi(k as i32 - 1) * step(k)).sum()
            }
            DiscrepancyReading::SkipLast => (0..n.saturating_sub(1))
                .map(|k| gamma.powi(k as i32) * step(k))
                .sum(),
        };
        (sum + (1.0 - gamma.powi(n as i32 - 1)) * v1_s).abs()
    }
}
