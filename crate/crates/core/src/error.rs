use thiserror::Error;

use crate::mdp::{ActionId, StateId};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("goal unreachable under hidden parameter {theta} ({label})")]
    GoalUnreachable { theta: usize, label: String },

    #[error("state id {0} out of range")]
    StateOutOfRange(usize),

    #[error(
        "grid state ({row}, {col}, lava_adjacent={lava_adjacent}) is not encodable in this layout"
    )]
    UnknownGridState {
        row: usize,
        col: usize,
        lava_adjacent: bool,
    },

    #[error("hidden parameter {0} out of range")]
    ThetaOutOfRange(usize),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("singular linear system while solving {0}")]
    Singular(&'static str),

    #[error("policy places no discounted mass on globally accessible states")]
    DegenerateSupport,

    #[error(
        "certificate is infeasible: transition ({}, {}, {}) has no detour within {m_max} steps",
        .state.0, .action.0, .next.0
    )]
    InfeasibleCertificate {
        state: StateId,
        action: ActionId,
        next: StateId,
        m_max: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("both discriminator datasets are empty")]
    EmptyDatasets,

    #[error("unsupported document: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
