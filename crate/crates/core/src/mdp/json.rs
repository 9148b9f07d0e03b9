use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{
    ActionId, HiddenParam, HipMdp, RewardTable, StateDistribution, StateId, TabularDynamics,
};
use crate::config::Tolerances;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "asor-lab/hipmdp";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub num_states: usize,
    pub num_actions: usize,
    pub num_thetas: usize,
    pub gamma: f64,
    pub lipschitz_action: f64,
}

/// Serialized form of a [`HipMdp`]. Transitions are `(theta, s, a, s', p)`,
/// rewards `(s, a, s', r)`; anything absent is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HipMdpDocument {
    pub header: Header,
    pub thetas: Vec<HiddenParam>,
    pub transitions: Vec<(usize, usize, usize, usize, f64)>,
    /// Terminal state ids, one list per θ.
    pub terminal: Vec<Vec<usize>>,
    pub rewards: Vec<(usize, usize, usize, f64)>,
    pub rho0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_features: Option<Vec<Vec<f64>>>,
}

impl HipMdpDocument {
    pub fn from_mdp(mdp: &HipMdp) -> Self {
        let mut transitions = Vec::new();
        let mut terminal = Vec::new();
        for t in mdp.thetas() {
            let d = mdp.dynamics(t.index).expect("index in range");
            transitions.extend(
                d.transitions()
                    .map(|(s, a, n, p)| (t.index, s.0, a.0, n.0, p)),
            );
            terminal.push(
                d.terminal_flags()
                    .iter()
                    .enumerate()
                    .filter(|(_, &f)| f)
                    .map(|(s, _)| s)
                    .collect(),
            );
        }
        Self {
            header: Header {
                format: FORMAT_NAME.into(),
                version: FORMAT_VERSION,
                num_states: mdp.num_states(),
                num_actions: mdp.num_actions(),
                num_thetas: mdp.num_thetas(),
                gamma: mdp.gamma(),
                lipschitz_action: mdp.rewards().lipschitz_action(),
            },
            thetas: mdp.thetas().to_vec(),
            transitions,
            terminal,
            rewards: mdp
                .rewards()
                .triples()
                .map(|(s, a, n, r)| (s.0, a.0, n.0, r))
                .collect(),
            rho0: mdp.rho0().mass().to_vec(),
            state_labels: mdp.state_labels().map(<[String]>::to_vec),
            state_features: mdp.state_features().map(<[Vec<f64>]>::to_vec),
        }
    }

    pub fn into_mdp(self) -> Result<HipMdp> {
        let h = &self.header;
        if h.format != FORMAT_NAME {
            return Err(Error::Format(format!(
                "expected format {FORMAT_NAME:?}, found {:?}",
                h.format
            )));
        }
        if h.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", h.version)));
        }
        let (ns, na, nt) = (h.num_states, h.num_actions, h.num_thetas);
        if self.thetas.len() != nt || self.terminal.len() != nt {
            return Err(Error::Format(
                "hidden parameter count disagrees with header".into(),
            ));
        }
        let tol = Tolerances::DEFAULT;
        let mut rows = vec![vec![Vec::new(); ns * na]; nt];
        for &(t, s, a, n, p) in &self.transitions {
            if t >= nt || s >= ns || a >= na || n >= ns {
                return Err(Error::Format(format!(
                    "transition ({t}, {s}, {a}, {n}) out of range"
                )));
            }
            rows[t][s * na + a].push((StateId(n), p));
        }
        let mut dynamics = Vec::with_capacity(nt);
        for (t, rows) in rows.into_iter().enumerate() {
            let mut flags = vec![false; ns];
            for &s in &self.terminal[t] {
                *flags.get_mut(s).ok_or(Error::StateOutOfRange(s))? = true;
            }
            dynamics.push(TabularDynamics::new(ns, na, rows, flags, &tol)?);
        }
        let rewards = RewardTable::from_triples(
            ns,
            na,
            self.rewards
                .iter()
                .map(|&(s, a, n, r)| (StateId(s), ActionId(a), StateId(n), r)),
            h.lipschitz_action,
        )?;
        let rho0 = StateDistribution::new(self.rho0, &tol)?;
        let mut mdp = HipMdp::new(self.thetas, dynamics, rewards, h.gamma, rho0, &tol)?;
        if let Some(labels) = self.state_labels {
            mdp = mdp.with_state_labels(labels)?;
        }
        if let Some(features) = self.state_features {
            mdp = mdp.with_state_features(features)?;
        }
        Ok(mdp)
    }
}

impl HipMdp {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HipMdpDocument::from_mdp(
            self,
        ))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<HipMdpDocument>(text)?.into_mdp()
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> HipMdp {
        let tol = Tolerances::DEFAULT;
        let mk = |p: f64| {
            TabularDynamics::new(
                2,
                1,
                vec![
                    vec![(StateId(0), p), (StateId(1), 1.0 - p)],
                    vec![(StateId(1), 1.0)],
                ],
                vec![false, true],
                &tol,
            )
            .unwrap()
        };
        let thetas = vec![
            HiddenParam {
                index: 0,
                weight: 0.3,
                label: "a".into(),
            },
            HiddenParam {
                index: 1,
                weight: 0.7,
                label: "b".into(),
            },
        ];
        let rewards = RewardTable::from_triples(
            2,
            1,
            [(StateId(0), ActionId(0), StateId(1), 0.1 + 0.2)],
            0.0,
        )
        .unwrap();
        HipMdp::new(
            thetas,
            vec![mk(0.1), mk(1.0 / 3.0)],
            rewards,
            0.95,
            StateDistribution::point(2, StateId(0)),
            &tol,
        )
        .unwrap()
        .with_state_labels(vec!["start".into(), "end".into()])
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let mdp = tiny();
        let back = HipMdp::from_json(&mdp.to_json().unwrap()).unwrap();
        assert_eq!(back, mdp);
    }

    #[test]
    fn rejects_wrong_version() {
        let mut doc = HipMdpDocument::from_mdp(&tiny());
        doc.header.version = 99;
        assert!(matches!(doc.into_mdp(), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_out_of_range_transition() {
        let mut doc = HipMdpDocument::from_mdp(&tiny());
        doc.transitions.push((0, 0, 0, 7, 0.0));
        assert!(doc.into_mdp().is_err());
    }
}
