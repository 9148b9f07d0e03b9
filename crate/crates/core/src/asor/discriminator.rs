use std::path::Path;

use serde::{Deserialize, Serialize};

use super::partition::{DatasetCounts, PartitionConfig, StateDatasets};
use crate::error::{Error, Result};
use crate::mdp::{HipMdp, RewardTable, StateId};

pub const DEFAULT_ALPHA: f64 = 1.0;

/// Per-state discriminator output `ω(s) ∈ (0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorTable {
    pub omega: Vec<f64>,
    pub alpha: f64,
    /// Class-balanced counts the table was fitted on.
    pub n_p: Vec<f64>,
    pub n_q: Vec<f64>,
}

impl DiscriminatorTable {
    /// Constant discriminator, mainly for tests and ablations.
    pub fn constant(num_states: usize, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::Config(format!(
                "constant ω = {omega} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            omega: vec![omega; num_states],
            alpha: 0.0,
            n_p: vec![0.0; num_states],
            n_q: vec![0.0; num_states],
        })
    }

    pub fn omega(&self, s: StateId) -> f64 {
        self.omega[s.0]
    }

    pub fn log_omega(&self, s: StateId) -> f64 {
        self.omega[s.0].ln()
    }

    /// Empirical objective `E_P[log ω] + E_Q[log(1 - ω)]` over the fitted counts.
    pub fn objective(&self) -> f64 {
        objective(&self.n_p, &self.n_q, &self.omega)
    }

    /// Writes `state,label,n_p,n_q,omega,log_omega` rows.
    pub fn write_csv(&self, mdp: &HipMdp, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        self.write_rows(mdp, &mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_rows<W: std::io::Write>(
        &self,
        mdp: &HipMdp,
        w: &mut csv::Writer<W>,
    ) -> Result<()> {
        w.write_record(["state", "label", "n_p", "n_q", "omega", "log_omega"])?;
        for (s, &om) in self.omega.iter().enumerate() {
            w.write_record([
                s.to_string(),
                mdp.state_label(StateId(s)),
                self.n_p[s].to_string(),
                self.n_q[s].to_string(),
                om.to_string(),
                om.ln().to_string(),
            ])?;
        }
        Ok(())
    }
}

/// `Σ p̂ log ω + Σ q̂ log(1-ω)` with `p̂, q̂` the normalized count vectors.
pub fn objective(n_p: &[f64], n_q: &[f64], omega: &[f64]) -> f64 {
    let (tp, tq) = (n_p.iter().sum::<f64>(), n_q.iter().sum::<f64>());
    let part = |n: &[f64], t: f64, f: &dyn Fn(f64) -> f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        n.iter()
            .zip(omega)
            .filter(|(&c, _)| c > 0.0)
            .map(|(&c, &w)| c / t * f(w))
            .sum()
    };
    part(n_p, tp, &|w| w.ln()) + part(n_q, tq, &|w| (1.0 - w).ln())
}

/// Closed-form maximizer of the discriminator objective over per-state
/// functions, Laplace-smoothed by `alpha`.
///
/// Counts are reweighted so that both datasets carry the same total mass
/// before smoothing. With equal dataset sizes this is
/// `(n_P + α) / (n_P + n_Q + 2α)`; in general, as `α → 0` it tends to
/// `p̂ / (p̂ + q̂)` with `p̂, q̂` the empirical distributions. If one dataset
/// is empty the raw counts are used.
pub fn fit_discriminator_counts(counts: &DatasetCounts, alpha: f64) -> Result<DiscriminatorTable> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Config(format!(
            "smoothing α = {alpha} must be positive"
        )));
    }
    let (tp, tq) = (counts.total_p(), counts.total_q());
    if tp <= 0.0 && tq <= 0.0 {
        return Err(Error::EmptyDatasets);
    }
    let (wp, wq) = if tp > 0.0 && tq > 0.0 {
        let half = 0.5 * (tp + tq);
        (half / tp, half / tq)
    } else {
        (1.0, 1.0)
    };
    let n_p: Vec<f64> = counts.n_p.iter().map(|c| c * wp).collect();
    let n_q: Vec<f64> = counts.n_q.iter().map(|c| c * wq).collect();
    let omega = n_p
        .iter()
        .zip(&n_q)
        .map(|(p, q)| (p + alpha) / (p + q + 2.0 * alpha))
        .collect();
    Ok(DiscriminatorTable {
        omega,
        alpha,
        n_p,
        n_q,
    })
}

pub fn fit_discriminator(
    ds: &StateDatasets,
    num_states: usize,
    alpha: f64,
) -> Result<DiscriminatorTable> {
    if let Some(s) = ds.d_p.iter().chain(&ds.d_q).find(|s| s.0 >= num_states) {
        return Err(Error::StateOutOfRange(s.0));
    }
    fit_discriminator_counts(&DatasetCounts::from_datasets(num_states, ds), alpha)
}

/// Reward table with `λ_A · log ω(s)` added to every transition leaving `s`.
///
/// Every transition that occurs under some hidden parameter receives the
/// bonus, including those whose base reward is zero.
pub fn augment_reward(
    mdp: &HipMdp,
    omega: &DiscriminatorTable,
    cfg: &PartitionConfig,
) -> Result<RewardTable> {
    cfg.validate()?;
    if omega.omega.len() != mdp.num_states() {
        return Err(Error::Config(
            "discriminator covers a different number of states".into(),
        ));
    }
    let base = mdp.rewards();
    let mut triples = std::collections::BTreeSet::new();
    for t in 0..mdp.num_thetas() {
        triples.extend(mdp.dynamics(t)?.transitions().map(|(s, a, n, _)| (s, a, n)));
    }
    triples.extend(base.triples().map(|(s, a, n, _)| (s, a, n)));
    RewardTable::from_triples(
        mdp.num_states(),
        mdp.num_actions(),
        triples.into_iter().map(|(s, a, n)| {
            let bonus = if cfg.lambda_aug == 0.0 {
                0.0
            } else {
                cfg.lambda_aug * omega.log_omega(s)
            };
            (s, a, n, base.get(s, a, n) + bonus)
        }),
        base.lipschitz_action(),
    )
}
