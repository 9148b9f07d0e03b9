//! Numerical tolerances shared by every exact computation in the crate.

use serde::{Deserialize, Serialize};

/// Tolerance and iteration-budget constants.
///
/// Every solver reads its thresholds from here so that a tightened check
/// changes in exactly one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed deviation of a transition or policy row sum from one.
    pub row_sum: f64,
    /// Allowed deviation of a state distribution from unit mass.
    pub distribution_sum: f64,
    /// Default Bellman residual target for value iteration / evaluation.
    pub bellman: f64,
    /// Iteration cap for value iteration before the model is declared malformed.
    pub max_value_iterations: usize,
    /// Largest state count for which occupancy uses a dense direct solve.
    pub direct_solve_cap: usize,
    /// Residual target for the iterative occupancy solver beyond the cap.
    pub richardson_residual: f64,
    /// Damping factor of the Richardson iteration.
    pub richardson_damping: f64,
    /// Iteration cap for the Richardson iteration.
    pub max_richardson_iterations: usize,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        row_sum: 1e-12,
        distribution_sum: 1e-9,
        bellman: 1e-10,
        max_value_iterations: 200_000,
        direct_solve_cap: 4096,
        richardson_residual: 1e-10,
        richardson_damping: 1.0,
        max_richardson_iterations: 1_000_000,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

pub const DEFAULT_GAMMA: f64 = 0.99;
