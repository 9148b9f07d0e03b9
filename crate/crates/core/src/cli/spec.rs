use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::DEFAULT_M_MAX;
use crate::error::{Error, Result};
use crate::lavaworld::LavaLayout;
use crate::train::{Algorithm, TrainerConfig};

/// Which optional tables `analyze` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisToggles {
    pub values: bool,
    pub occupancy: bool,
    pub js: bool,
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        Self {
            values: true,
            occupancy: true,
            js: true,
        }
    }
}

/// Everything a command needs, read from TOML and patched by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Layout file; the built-in canonical layout when absent. Relative paths
    /// are resolved against the directory of the experiment file.
    pub layout: Option<PathBuf>,
    pub out: PathBuf,
    pub seeds: Vec<u64>,
    pub analysis: AnalysisToggles,
    /// One entry per compared configuration.
    pub trainers: Vec<TrainerConfig>,
    pub m_max: usize,
    /// Random policies drawn by `verify-bounds`.
    pub policy_samples: usize,
    pub policy_seed: u64,
    /// Monte-Carlo episodes per hidden parameter in `eval`.
    pub eval_episodes: usize,
    /// λ values swept by `ablate`.
    pub ablation_lambdas: Vec<f64>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            layout: None,
            out: PathBuf::from("out"),
            seeds: (0..10).collect(),
            analysis: AnalysisToggles::default(),
            trainers: Algorithm::ALL
                .into_iter()
                .map(|algorithm| TrainerConfig {
                    algorithm,
                    ..Default::default()
                })
                .collect(),
            m_max: DEFAULT_M_MAX,
            policy_samples: 100,
            policy_seed: 0,
            eval_episodes: 1000,
            ablation_lambdas: vec![0.0, 0.05, 0.1, 0.2],
        }
    }
}

/// Command-line overrides, applied on top of a spec.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub layout: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Number of seeds; runs use seeds `0..n`.
    pub seeds: Option<usize>,
    pub m_max: Option<usize>,
    pub algorithms: Vec<Algorithm>,
    pub lambda: Option<f64>,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read spec {}: {e}", path.display())))?;
        let mut spec = Self::from_toml_str(&text)?;
        if let (Some(layout), Some(dir)) = (&spec.layout, path.parent()) {
            if layout.is_relative() {
                spec.layout = Some(dir.join(layout));
            }
        }
        Ok(spec)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(layout) = &o.layout {
            self.layout = Some(layout.clone());
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(n) = o.seeds {
            self.seeds = (0..n as u64).collect();
        }
        if let Some(m) = o.m_max {
            self.m_max = m;
        }
        if !o.algorithms.is_empty() {
            let template = self.trainers.first().cloned().unwrap_or_default();
            self.trainers = o
                .algorithms
                .iter()
                .map(|&algorithm| TrainerConfig {
                    algorithm,
                    ..template.clone()
                })
                .collect();
        }
        for t in &mut self.trainers {
            if let Some(l) = o.lambda {
                t.partition.lambda_aug = l;
            }
            if let Some(r) = o.rho1 {
                t.partition.rho1 = r;
            }
            if let Some(r) = o.rho2 {
                t.partition.rho2 = r;
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.m_max == 0 {
            return Err(Error::Config("m_max must be at least 1".into()));
        }
        if self.trainers.is_empty() {
            return Err(Error::Config("no trainer configurations given".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be positive".into()));
        }
        if let Some(p) = &self.layout {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "layout file {} does not exist",
                    p.display()
                )));
            }
        }
        self.trainers.iter().try_for_each(TrainerConfig::validate)
    }

    pub fn lava_layout(&self) -> Result<LavaLayout> {
        match &self.layout {
            Some(p) => LavaLayout::load(p),
            None => Ok(LavaLayout::canonical()),
        }
    }

    /// File-name labels for the trainer list; repeated algorithms get a suffix.
    pub fn trainer_labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = Vec::with_capacity(self.trainers.len());
        for t in &self.trainers {
            let base = t.algorithm.name();
            let n = labels
                .iter()
                .filter(|l| l.split('-').next() == Some(base))
                .count();
            labels.push(if n == 0 {
                base.to_string()
            } else {
                format!("{base}-{}", n + 1)
            });
        }
        labels
    }
}
