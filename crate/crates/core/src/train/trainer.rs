use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainerConfig;
use super::evaluate::{exact_per_theta, weighted_mean, EvalMode};
use super::rollout::{rollout, Trajectory};
use crate::asor::{
    fit_discriminator_counts, partition, DatasetCounts, DiscriminatorTable, HashedCounts,
    VisitCounts,
};
use crate::error::Result;
use crate::mdp::{HipMdp, StateId, TabularPolicy, ValueTable};

/// Seed offset of the count sketch so it never shares a stream with rollouts.
const SKETCH_SEED_SALT: u64 = 0x5eed_c0de;

/// Statistics of one training iteration. Returns use the environment reward only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_return: f64,
    /// Mean return per hidden parameter; `None` if no episode drew it.
    pub per_theta_return: Vec<Option<f64>>,
    pub mean_length: f64,
    /// Mean per-step reward including the bonus.
    pub mean_augmented_reward: f64,
    pub mean_bonus: f64,
    /// Negated discriminator objective on the accumulated datasets.
    pub discriminator_loss: Option<f64>,
    /// Share of the batch placed in the positive dataset.
    pub positive_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub algorithm: String,
    pub seed: u64,
    pub iterations: Vec<IterationStats>,
    /// Set when the mean return stayed below the configured floor for too long.
    pub diverged: bool,
    pub eval_mode: EvalMode,
    /// Exact expected episodic return of the final policy per hidden parameter.
    pub final_per_theta: Vec<f64>,
    pub final_mean_return: f64,
    pub wall_clock_secs: f64,
}

impl TrainReport {
    /// The report with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: TabularPolicy,
    pub report: TrainReport,
    pub critic: Vec<f64>,
    pub discriminator: Option<DiscriminatorTable>,
    /// Visit counts over the whole run, exact and sketched.
    pub visits: VisitCounts,
}

/// Per-step quantities flattened across a batch.
struct Sample {
    state: usize,
    action: usize,
    advantage: f64,
    old_prob: f64,
}

/// Tabular softmax PPO over the family, with θ redrawn each episode.
///
/// Each iteration samples a batch, optionally rebuilds the discriminator from
/// the value/count partition of the visited states, computes GAE advantages
/// on the (augmented) reward with a tabular critic, and takes several
/// clipped-surrogate gradient steps on the logits.
pub fn train(mdp: &HipMdp, cfg: &TrainerConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let gamma = mdp.gamma();
    let part_cfg = cfg.effective_partition();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut logits = vec![0.0; ns * na];
    let mut critic = vec![0.0; ns];
    let mut visits = match mdp.state_features() {
        Some(f) => VisitCounts::with_sketch(
            ns,
            HashedCounts::new(f, cfg.sketch_buckets, cfg.seed ^ SKETCH_SEED_SALT)?,
        )?,
        None => VisitCounts::new(ns),
    };
    let mut datasets = DatasetCounts::new(ns);
    let mut discriminator = None;
    let mut stats = Vec::with_capacity(cfg.iterations);
    let mut below_floor = 0usize;
    let mut diverged = false;

    for iteration in 0..cfg.iterations {
        let pi = TabularPolicy::softmax(ns, na, &logits);
        let batch = rollout(mdp, &pi, cfg.episodes_per_iter, cfg.horizon_cap, &mut rng)?;

        let mut bonus = vec![0.0; ns];
        let mut disc_loss = None;
        let mut positive_fraction = None;
        let visited: Vec<StateId> = batch
            .iter()
            .flat_map(|t| t.steps.iter().map(|s| s.state))
            .collect();
        visits.update(visited.iter().copied());
        if cfg.algorithm.augments() && !visited.is_empty() {
            let values = ValueTable {
                v: critic.clone(),
                q: None,
                residual: f64::NAN,
            };
            let ds = partition(&visited, &values, &visits, &part_cfg, cfg.count_source)?;
            positive_fraction = Some(ds.d_p.len() as f64 / visited.len() as f64);
            datasets.accumulate(&ds, cfg.dataset_decay);
            let disc = fit_discriminator_counts(&datasets, cfg.alpha)?;
            disc_loss = Some(-disc.objective());
            if part_cfg.lambda_aug != 0.0 {
                for (b, w) in bonus.iter_mut().zip(&disc.omega) {
                    *b = part_cfg.lambda_aug * w.ln();
                }
            }
            discriminator = Some(disc);
        }

        let samples = advantages(&batch, &pi, &bonus, &mut critic, gamma, cfg);
        ppo_update(&mut logits, &samples, ns, na, cfg);

        let it = iteration_stats(iteration, mdp, &batch, &bonus, disc_loss, positive_fraction);
        if it.mean_return < cfg.divergence_floor {
            below_floor += 1;
            diverged |= below_floor >= cfg.divergence_patience;
        } else {
            below_floor = 0;
        }
        stats.push(it);
    }

    let policy = TabularPolicy::softmax(ns, na, &logits);
    let final_per_theta = exact_per_theta(mdp, &policy, cfg.horizon_cap, cfg.eval_mode)?;
    let report = TrainReport {
        algorithm: cfg.algorithm.name().into(),
        seed: cfg.seed,
        iterations: stats,
        diverged,
        eval_mode: cfg.eval_mode,
        final_mean_return: weighted_mean(mdp, &final_per_theta),
        final_per_theta,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        policy,
        report,
        critic,
        discriminator,
        visits,
    })
}

/// GAE advantages on the augmented reward; also moves the critic toward the
/// λ-returns. Advantages are optionally standardized across the batch.
fn advantages(
    batch: &[Trajectory],
    pi: &TabularPolicy,
    bonus: &[f64],
    critic: &mut [f64],
    gamma: f64,
    cfg: &TrainerConfig,
) -> Vec<Sample> {
    let mut samples = Vec::new();
    let mut target_sum = vec![0.0; critic.len()];
    let mut target_n = vec![0usize; critic.len()];
    for traj in batch {
        let mut gae = 0.0;
        let mut adv = vec![0.0; traj.len()];
        for (k, step) in traj.steps.iter().enumerate().rev() {
            let r = step.reward + bonus[step.state.0];
            let next_v = if step.terminal {
                0.0
            } else {
                critic[step.next_state.0]
            };
            let delta = r + gamma * next_v - critic[step.state.0];
            // Truncation at the horizon bootstraps through `next_v` but does
            // not chain to a following step.
            let carry = if step.terminal || k + 1 == traj.len() {
                0.0
            } else {
                gae
            };
            gae = delta + gamma * cfg.gae_lambda * carry;
            adv[k] = gae;
        }
        for (step, a) in traj.steps.iter().zip(&adv) {
            let s = step.state.0;
            target_sum[s] += a + critic[s];
            target_n[s] += 1;
            samples.push(Sample {
                state: s,
                action: step.action.0,
                advantage: *a,
                old_prob: pi.prob(step.state, step.action),
            });
        }
    }
    for (s, v) in critic.iter_mut().enumerate() {
        if target_n[s] > 0 {
            let mean = target_sum[s] / target_n[s] as f64;
            *v += cfg.critic_lr * (mean - *v);
        }
    }
    if cfg.normalize_advantages && samples.len() > 1 {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.advantage).sum::<f64>() / n;
        let var = samples
            .iter()
            .map(|s| (s.advantage - mean).powi(2))
            .sum::<f64>()
            / n;
        let std = var.sqrt() + 1e-8;
        for s in &mut samples {
            s.advantage = (s.advantage - mean) / std;
        }
    }
    samples
}

/// Gradient ascent on the clipped surrogate plus an entropy bonus, applied
/// only to rows of visited states.
fn ppo_update(logits: &mut [f64], samples: &[Sample], ns: usize, na: usize, cfg: &TrainerConfig) {
    let scale = cfg.learning_rate / cfg.episodes_per_iter as f64;
    let (lo, hi) = (1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    let mut grad = vec![0.0; ns * na];
    for _ in 0..cfg.update_epochs {
        let pi = TabularPolicy::softmax(ns, na, logits);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for smp in samples {
            let row = pi.row(StateId(smp.state));
            let ratio = row[smp.action] / smp.old_prob;
            let clipped =
                (smp.advantage >= 0.0 && ratio > hi) || (smp.advantage < 0.0 && ratio < lo);
            let g = &mut grad[smp.state * na..(smp.state + 1) * na];
            if !clipped {
                let w = smp.advantage * ratio;
                for (b, gb) in g.iter_mut().enumerate() {
                    *gb += w * (f64::from(u8::from(b == smp.action)) - row[b]);
                }
            }
            if cfg.entropy_coef > 0.0 {
                let h: f64 = -row
                    .iter()
                    .filter(|&&p| p > 0.0)
                    .map(|p| p * p.ln())
                    .sum::<f64>();
                for (b, gb) in g.iter_mut().enumerate() {
                    if row[b] > 0.0 {
                        *gb -= cfg.entropy_coef * row[b] * (row[b].ln() + h);
                    }
                }
            }
        }
        for (l, g) in logits.iter_mut().zip(&grad) {
            *l += scale * g;
        }
    }
}

fn iteration_stats(
    iteration: usize,
    mdp: &HipMdp,
    batch: &[Trajectory],
    bonus: &[f64],
    discriminator_loss: Option<f64>,
    positive_fraction: Option<f64>,
) -> IterationStats {
    let n = batch.len() as f64;
    let mut per_theta = vec![(0.0, 0usize); mdp.num_thetas()];
    let (mut steps, mut aug, mut bon) = (0usize, 0.0, 0.0);
    for t in batch {
        let ret = t.undiscounted_return();
        per_theta[t.theta].0 += ret;
        per_theta[t.theta].1 += 1;
        for s in &t.steps {
            steps += 1;
            aug += s.reward + bonus[s.state.0];
            bon += bonus[s.state.0];
        }
    }
    let steps_f = steps.max(1) as f64;
    IterationStats {
        iteration,
        mean_return: batch
            .iter()
            .map(Trajectory::undiscounted_return)
            .sum::<f64>()
            / n,
        per_theta_return: per_theta
            .into_iter()
            .map(|(sum, k)| (k > 0).then(|| sum / k as f64))
            .collect(),
        mean_length: steps as f64 / n,
        mean_augmented_reward: aug / steps_f,
        mean_bonus: bon / steps_f,
        discriminator_loss,
        positive_fraction,
    }
}
