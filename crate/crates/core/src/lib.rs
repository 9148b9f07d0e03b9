//! Exact tabular laboratory for policy optimization under dynamics shift.
//!
//! The crate models a family of MDPs that share states, actions and rewards
//! but differ in their transition kernel (a hidden-parameter MDP), and offers:
//!
//! * [`mdp`]: the data model plus value iteration, policy evaluation,
//!   discounted occupancy and returns, all solved exactly;
//! * [`lavaworld`]: a configurable grid family with a movable lava row;
//! * [`analysis`]: globally accessible states, accessible distributions,
//!   Jensen-Shannon divergence, detour certificates and bound checks;
//! * [`asor`]: visit counts, the value/count partition, the closed-form
//!   discriminator and reward augmentation;
//! * [`train`]: a tabular PPO trainer with optional augmentation;
//! * [`cli`]: the command-line front end.

pub mod analysis;
pub mod asor;
pub mod cli;
pub mod config;
pub mod error;
pub mod lavaworld;
pub mod mdp;
pub mod train;

pub use config::{Tolerances, DEFAULT_GAMMA};
pub use error::{Error, Result};
