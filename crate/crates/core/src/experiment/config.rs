//! The experiment document.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{Algorithm, TrainerConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::netsim::{BitsConvention, TopologyKind};
use crate::tasks::{CsvSource, SplitSpec, SynthSpec};

/// Default interaction fraction for `sheaf-fmtl` entries without `gamma`.
pub const DEFAULT_GAMMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum DataConfig {
    Synthetic(SynthSpec),
    Csv(CsvSource),
}

/// One algorithm to run; trainer fields sit at the same level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEntry {
    #[serde(default)]
    pub label: Option<String>,
    /// `d_ij = max(1, ⌊γ · min(d_i, d_j)⌋)` for `sheaf-fmtl`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(flatten)]
    pub trainer: TrainerConfig,
}

impl AlgorithmEntry {
    pub fn new(trainer: TrainerConfig) -> Self {
        AlgorithmEntry {
            label: None,
            gamma: None,
            trainer,
        }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = Some(gamma);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.trainer.algorithm.name().to_string())
    }

    pub fn gamma(&self) -> f64 {
        match self.trainer.algorithm {
            Algorithm::SheafFmtl => self.gamma.unwrap_or(DEFAULT_GAMMA),
            _ => 1.0,
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}
fn default_repeats() -> usize {
    1
}
fn default_eval_every() -> usize {
    1
}
fn default_scalar_bits() -> u32 {
    32
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Independent repetitions with seeds `seed, seed + 1, ...`.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default)]
    pub bits_convention: BitsConvention,
    #[serde(default = "default_scalar_bits")]
    pub scalar_bits: u32,
    /// Z-scores features with training statistics.
    #[serde(default)]
    pub standardize: bool,
    /// Schedules repeats (and per-client work inside them).
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub topology: Option<TopologyKind>,
    /// Fixed client graph in edge-list format; replaces `topology`.
    #[serde(default)]
    pub edge_list: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub split: SplitSpec,
    pub algorithms: Vec<AlgorithmEntry>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative data and edge-list paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::from(e).at(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DataConfig::Csv(src) = &mut cfg.data {
            src.files.iter_mut().for_each(resolve);
        }
        if let Some(p) = &mut cfg.edge_list {
            resolve(p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn run_id(&self) -> String {
        format!("{}-seed{}", self.name, self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::param("repeats", "must be at least 1").at("repeats"));
        }
        if self.eval_every == 0 {
            return Err(Error::param("eval_every", "must be positive").at("eval_every"));
        }
        if self.scalar_bits == 0 {
            return Err(Error::param("scalar_bits", "must be positive").at("scalar_bits"));
        }
        match (&self.topology, &self.edge_list) {
            (None, None) => {
                return Err(
                    Error::param("topology", "set either `topology` or `edge_list`").at("topology"),
                )
            }
            (Some(_), Some(_)) => {
                return Err(Error::param(
                    "topology",
                    "`topology` and `edge_list` are mutually exclusive",
                )
                .at("topology"))
            }
            _ => {}
        }
        if self.algorithms.is_empty() {
            return Err(
                Error::param("algorithms", "at least one algorithm is required").at("algorithms"),
            );
        }
        let mut labels = BTreeSet::new();
        for (k, a) in self.algorithms.iter().enumerate() {
            let at = format!("algorithms[{k}]");
            a.trainer.validate().map_err(|e| e.at(&at))?;
            if let Some(g) = a.gamma {
                if !(g > 0.0 && g <= 1.0) {
                    return Err(Error::param("gamma", format!("{g} is outside (0, 1]")).at(&at));
                }
            }
            if !labels.insert(a.label()) {
                return Err(
                    Error::param("label", format!("duplicate label `{}`", a.label())).at(&at),
                );
            }
        }
        Ok(())
    }
}
