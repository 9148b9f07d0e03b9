use serde::{Deserialize, Serialize};

use super::counts::{CountSource, VisitCounts};
use crate::error::{Error, Result};
use crate::mdp::{StateId, ValueTable};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionConfig {
    /// Fraction of the batch kept by the value threshold.
    pub rho1: f64,
    /// Fraction of the batch kept by the count threshold. `1.0` disables the filter.
    pub rho2: f64,
    /// Weight of the `log ω` bonus.
    pub lambda_aug: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            rho1: 0.5,
            rho2: 0.5,
            lambda_aug: 0.1,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1]")));
            }
        }
        if !(self.lambda_aug >= 0.0) || !self.lambda_aug.is_finite() {
            return Err(Error::Config(format!(
                "lambda = {} must be finite and non-negative",
                self.lambda_aug
            )));
        }
        Ok(())
    }

    /// Same settings with the count filter switched off.
    pub fn value_only(self) -> Self {
        Self { rho2: 1.0, ..self }
    }
}

/// Positive (`d_p`) and contrast (`d_q`) states, as multisets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateDatasets {
    pub d_p: Vec<StateId>,
    pub d_q: Vec<StateId>,
}

/// Smallest of the top `⌈ρ·n⌉` entries; everything at or above it passes.
fn top_threshold<T: PartialOrd + Copy>(mut xs: Vec<T>, rho: f64) -> T {
    xs.sort_by(|a, b| b.partial_cmp(a).expect("no NaN in thresholds"));
    let k = ((rho * xs.len() as f64).ceil() as usize).clamp(1, xs.len());
    xs[k - 1]
}

/// Splits a batch into states that are both high-value and frequently
/// visited, and the rest. Thresholds are quantiles over the batch with ties
/// kept, so the positive share can exceed `ρ1·ρ2`.
pub fn partition(
    batch: &[StateId],
    values: &ValueTable,
    vc: &VisitCounts,
    cfg: &PartitionConfig,
    source: CountSource,
) -> Result<StateDatasets> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let v_of = |s: StateId| values.v[s.0];
    let v_cut = top_threshold(batch.iter().map(|&s| v_of(s)).collect(), cfg.rho1);
    let c_cut = top_threshold(
        batch.iter().map(|&s| vc.count(s, source)).collect(),
        cfg.rho2,
    );
    let (d_p, d_q) = batch
        .iter()
        .partition(|&&s| v_of(s) >= v_cut && vc.count(s, source) >= c_cut);
    Ok(StateDatasets { d_p, d_q })
}

/// Per-state weighted occurrence counts of the two datasets, accumulated
/// across iterations with geometric decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub n_p: Vec<f64>,
    pub n_q: Vec<f64>,
}

impl DatasetCounts {
    pub fn new(num_states: usize) -> Self {
        Self {
            n_p: vec![0.0; num_states],
            n_q: vec![0.0; num_states],
        }
    }

    pub fn from_datasets(num_states: usize, ds: &StateDatasets) -> Self {
        let mut out = Self::new(num_states);
        out.accumulate(ds, 0.0);
        out
    }

    /// Scales existing counts by `decay` and adds the new batch.
    pub fn accumulate(&mut self, ds: &StateDatasets, decay: f64) {
        self.n_p
            .iter_mut()
            .chain(self.n_q.iter_mut())
            .for_each(|x| *x *= decay);
        for s in &ds.d_p {
            self.n_p[s.0] += 1.0;
        }
        for s in &ds.d_q {
            self.n_q[s.0] += 1.0;
        }
    }

    pub fn total_p(&self) -> f64 {
        self.n_p.iter().sum()
    }

    pub fn total_q(&self) -> f64 {
        self.n_q.iter().sum()
    }
}
