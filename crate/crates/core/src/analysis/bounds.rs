use serde::{Deserialize, Serialize};

use super::accessible::{accessible_distribution_in, accessible_states};
use super::certify::{AccessibilityCertificate, FamilyCertificate};
use super::divergence::js_divergence;
use crate::config::Tolerances;
use crate::error::Result;
use crate::mdp::{
    expected_return, expected_return_averaged, occupancy, optimal_policy, value_iteration, HipMdp,
    StateId, TabularPolicy,
};

/// Measured optimal-value gap between two kernels against the certified bound
/// `(R_s + 2λ) / (1 - γ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    pub theta1: usize,
    pub theta2: usize,
    pub measured: f64,
    pub argmax_state: StateId,
    pub bound: f64,
    pub slack: f64,
    pub holds: bool,
}

pub fn verify_value_discrepancy(
    mdp: &HipMdp,
    theta1: usize,
    theta2: usize,
    cert: &AccessibilityCertificate,
) -> Result<DiscrepancyReport> {
    cert.require_feasible()?;
    let tol = Tolerances::DEFAULT.bellman;
    let v1 = value_iteration(mdp, theta1, tol)?.v;
    let v2 = value_iteration(mdp, theta2, tol)?.v;
    let (argmax, measured) = v1
        .iter()
        .zip(&v2)
        .map(|(a, b)| (a - b).abs())
        .enumerate()
        .fold(
            (0, 0.0),
            |best, (s, d)| if d > best.1 { (s, d) } else { best },
        );
    let bound = (cert.r_s + 2.0 * mdp.rewards().lipschitz_action()) / (1.0 - mdp.gamma());
    Ok(DiscrepancyReport {
        theta1,
        theta2,
        measured,
        argmax_state: StateId(argmax),
        bound,
        slack: bound - measured,
        holds: measured <= bound,
    })
}

/// Lower bound on the family return of a policy whose occupancies stay within
/// `ε` (Jensen-Shannon) of the accessible optimal distribution of a reference
/// kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub reference_theta: usize,
    /// θ-averaged return of the evaluated policy.
    pub eta_hat: f64,
    /// Best per-θ optimal return.
    pub eta_star_max: f64,
    pub epsilon: f64,
    pub per_theta_js: Vec<f64>,
    pub r_s: f64,
    pub lambda: f64,
    pub r_max: f64,
    pub bound_value: f64,
    pub holds: bool,
}

impl BoundReport {
    pub fn slack(&self) -> f64 {
        self.eta_hat - (self.eta_star_max - self.bound_value)
    }
}

/// Reference kernel with the highest optimal return; ties go to the lowest index.
pub fn default_reference_theta(mdp: &HipMdp) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for t in 0..mdp.num_thetas() {
        let (pi, _) = optimal_policy(mdp, t, Tolerances::DEFAULT.bellman)?;
        let eta = expected_return(mdp, t, &pi)?;
        if eta > best.1 {
            best = (t, eta);
        }
    }
    Ok(best.0)
}

/// Per-θ optimal returns `η_θ(π*_θ)`.
pub fn optimal_returns(mdp: &HipMdp) -> Result<Vec<f64>> {
    (0..mdp.num_thetas())
        .map(|t| {
            let (pi, _) = optimal_policy(mdp, t, Tolerances::DEFAULT.bellman)?;
            expected_return(mdp, t, &pi)
        })
        .collect()
}

pub fn verify_return_bound(
    mdp: &HipMdp,
    pi_hat: &TabularPolicy,
    reference_theta: usize,
    cert: &FamilyCertificate,
) -> Result<BoundReport> {
    cert.require_feasible()?;
    mdp.check_policy(pi_hat)?;
    let set = accessible_states(mdp);
    let (pi_ref, _) = optimal_policy(mdp, reference_theta, Tolerances::DEFAULT.bellman)?;
    let target = accessible_distribution_in(mdp, reference_theta, &pi_ref, &set)?;
    let per_theta_js = (0..mdp.num_thetas())
        .map(|t| js_divergence(&occupancy(mdp, t, pi_hat)?, &target))
        .collect::<Result<Vec<_>>>()?;
    let epsilon = per_theta_js.iter().copied().fold(0.0, f64::max);
    let eta_hat = expected_return_averaged(mdp, pi_hat)?;
    let eta_star_max = optimal_returns(mdp)?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let lambda = mdp.rewards().lipschitz_action();
    let r_max = mdp.rewards().r_max();
    let bound_value = (2.0 * cert.r_s + 6.0 * lambda + 2.0 * r_max * epsilon) / (1.0 - mdp.gamma());
    Ok(BoundReport {
        reference_theta,
        eta_hat,
        eta_star_max,
        epsilon,
        per_theta_js,
        r_s: cert.r_s,
        lambda,
        r_max,
        bound_value,
        holds: eta_hat >= eta_star_max - bound_value,
    })
}
