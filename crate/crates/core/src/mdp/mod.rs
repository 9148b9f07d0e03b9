//! Tabular hidden-parameter MDPs and their exact evaluation.

mod eval;
mod json;
mod model;

pub use eval::{
    expected_return, expected_return_averaged, greedy_policy, occupancy, occupancy_residual,
    occupancy_with, optimal_policy, policy_evaluation, policy_evaluation_with,
    return_from_occupancy, value_iteration, value_iteration_from,
};
pub use json::{HipMdpDocument, FORMAT_NAME, FORMAT_VERSION};
pub use model::{
    ActionId, HiddenParam, HipMdp, RewardTable, StateDistribution, StateId, TabularDynamics,
    TabularPolicy, ValueTable,
};
