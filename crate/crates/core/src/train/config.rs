use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::evaluate::EvalMode;
use super::rollout::DEFAULT_HORIZON;
use crate::asor::{CountSource, PartitionConfig, DEFAULT_ALPHA, DEFAULT_BUCKETS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Plain PPO on the environment reward.
    Ppo,
    /// PPO with the value-and-count partition bonus.
    PpoAsor,
    /// PPO with a value-only partition bonus (no count filter). An in-house
    /// approximation of regularizing toward the optimal distribution over all
    /// states, not a reimplementation of any published method.
    PpoSrpoStyle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Ppo, Algorithm::PpoAsor, Algorithm::PpoSrpoStyle];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ppo => "ppo",
            Algorithm::PpoAsor => "ppo_asor",
            Algorithm::PpoSrpoStyle => "ppo_srpo_style",
        }
    }

    pub fn augments(self) -> bool {
        !matches!(self, Algorithm::Ppo)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown algorithm {s:?} (expected ppo, ppo_asor or ppo_srpo_style)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    pub episodes_per_iter: usize,
    pub iterations: usize,
    pub horizon_cap: usize,
    pub learning_rate: f64,
    pub clip_ratio: f64,
    pub gae_lambda: f64,
    pub entropy_coef: f64,
    /// Passes of the clipped-surrogate update over each batch.
    pub update_epochs: usize,
    /// Step size of the tabular critic toward its λ-return targets.
    pub critic_lr: f64,
    /// Rescale advantages to zero mean and unit variance across each batch.
    pub normalize_advantages: bool,
    pub seed: u64,
    pub partition: PartitionConfig,
    /// Laplace smoothing of the discriminator.
    pub alpha: f64,
    /// Per-iteration decay of the accumulated partition datasets.
    pub dataset_decay: f64,
    pub count_source: CountSource,
    pub sketch_buckets: usize,
    /// A run is flagged when its mean return stays below this floor ...
    pub divergence_floor: f64,
    /// ... for this many consecutive iterations.
    pub divergence_patience: usize,
    /// Policy used for the final per-θ evaluation.
    pub eval_mode: EvalMode,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Ppo,
            episodes_per_iter: 32,
            iterations: 300,
            horizon_cap: DEFAULT_HORIZON,
            learning_rate: 0.05,
            clip_ratio: 0.2,
            gae_lambda: 0.95,
            entropy_coef: 0.01,
            update_epochs: 4,
            critic_lr: 0.5,
            normalize_advantages: true,
            seed: 0,
            partition: PartitionConfig::default(),
            alpha: DEFAULT_ALPHA,
            dataset_decay: 0.99,
            count_source: CountSource::Exact,
            sketch_buckets: DEFAULT_BUCKETS,
            divergence_floor: -3.0,
            divergence_patience: 50,
            eval_mode: EvalMode::Stochastic,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.episodes_per_iter == 0
            || self.iterations == 0
            || self.horizon_cap == 0
            || self.update_epochs == 0
        {
            return bad("episode, iteration, horizon and epoch counts must be positive".into());
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad(format!("clip ratio {} must lie in (0, 1)", self.clip_ratio));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("GAE λ {} must lie in [0, 1]", self.gae_lambda));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        if !(self.critic_lr > 0.0 && self.critic_lr <= 1.0) {
            return bad(format!("critic step {} must lie in (0, 1]", self.critic_lr));
        }
        if !(self.entropy_coef >= 0.0) || !self.entropy_coef.is_finite() {
            return bad(format!(
                "entropy coefficient {} must be non-negative",
                self.entropy_coef
            ));
        }
        if !(0.0..=1.0).contains(&self.dataset_decay) {
            return bad(format!(
                "dataset decay {} must lie in [0, 1]",
                self.dataset_decay
            ));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return bad(format!("smoothing α = {} must be positive", self.alpha));
        }
        self.partition.validate()
    }

    /// Partition settings in effect for the configured algorithm.
    pub fn effective_partition(&self) -> PartitionConfig {
        match self.algorithm {
            Algorithm::PpoSrpoStyle => self.partition.value_only(),
            _ => self.partition,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("sac".parse::<Algorithm>().is_err());
    }

    #[test]
    fn default_is_valid_and_rejects_bad_clip() {
        TrainerConfig::default().validate().unwrap();
        let cfg = TrainerConfig {
            clip_ratio: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn srpo_style_drops_count_filter() {
        let cfg = TrainerConfig {
            algorithm: Algorithm::PpoSrpoStyle,
            ..Default::default()
        };
        assert_eq!(cfg.effective_partition().rho2, 1.0);
        assert_eq!(cfg.effective_partition().rho1, cfg.partition.rho1);
    }

    #[test]
    fn parses_partial_toml() {
        let cfg: TrainerConfig = toml::from_str("algorithm = \"ppo_asor\"\niterations = 10\n[partition]\nrho1 = 0.3\nrho2 = 0.4\nlambda_aug = 0.2\n").unwrap();
        assert_eq!(cfg.algorithm, Algorithm::PpoAsor);
        assert_eq!(cfg.iterations, 10);
        assert_eq!(cfg.partition.rho1, 0.3);
        assert_eq!(cfg.episodes_per_iter, 32);
    }
}
