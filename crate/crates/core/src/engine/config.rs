//! Trainer configuration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Joint learning of models and restriction maps.
    SheafFmtl,
    /// Fixed identity coupling between equal-size models.
    Dfedu,
    /// Independent gradient descent, no communication.
    Local,
    /// Gossip averaging with Metropolis-Hastings weights followed by a local
    /// gradient step.
    Dpsgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::SheafFmtl,
        Algorithm::Dfedu,
        Algorithm::Local,
        Algorithm::Dpsgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SheafFmtl => "sheaf-fmtl",
            Algorithm::Dfedu => "dfedu",
            Algorithm::Local => "local",
            Algorithm::Dpsgd => "dpsgd",
        }
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
            .ok_or_else(|| Error::param("algorithm", format!("unknown algorithm `{s}`")))
    }
}

/// Distribution of the initial restriction maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitKind {
    /// Entries drawn from `N(0, σ²)`.
    Gaussian {
        sigma: f64,
    },
    /// Entries drawn from `U[−a, a]`.
    Uniform {
        a: f64,
    },
    /// Orthonormal rows; needs `d_ij ≤ d_i`.
    Orthogonal,
    /// First `d_ij` rows of the identity plus `N(0, σ²)` noise.
    IdentityPlusNoise {
        sigma: f64,
    },
    Identity,
    Zeros,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    #[serde(flatten)]
    pub kind: InitKind,
    #[serde(default)]
    pub seed: u64,
}

impl Default for InitSpec {
    fn default() -> Self {
        InitSpec {
            kind: InitKind::Gaussian { sigma: 1.0 },
            seed: 0,
        }
    }
}

impl InitSpec {
    pub fn new(kind: InitKind, seed: u64) -> Self {
        InitSpec { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("{v} must be positive")))
            }
        };
        match self.kind {
            InitKind::Gaussian { sigma } | InitKind::IdentityPlusNoise { sigma } => {
                positive("sigma", sigma)
            }
            InitKind::Uniform { a } => positive("a", a),
            InitKind::Orthogonal | InitKind::Identity | InitKind::Zeros => Ok(()),
        }
    }
}

fn default_lambda() -> f64 {
    0.01
}

fn default_rounds() -> usize {
    100
}

fn default_true() -> bool {
    true
}

fn default_scalar_bits() -> u32 {
    32
}

fn default_eval_every() -> usize {
    1
}

/// Everything a training run needs besides the sheaf and the data.
///
/// `alpha` and `eta` may be left unset, in which case they are derived from
/// the data (see [`crate::engine::auto_step_sizes`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig {
    pub algorithm: Algorithm,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Mini-batch size; full batch when unset.
    #[serde(default)]
    pub batch_size: Option<usize>,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub seed: u64,
    /// Domain bound used by the step-size check; the running maximum of
    /// `‖θ‖` is used when unset.
    #[serde(default)]
    pub d_theta: Option<f64>,
    /// Overrides the smoothness constant estimated from the data.
    #[serde(default)]
    pub smoothness: Option<f64>,
    #[serde(default)]
    pub execution: Execution,
    /// Keeps the maps at their initial values (η ignored).
    #[serde(default)]
    pub freeze_maps: bool,
    /// Lets the sheaf method start from all-zero maps. Only useful to
    /// exercise the degenerate case.
    #[serde(default)]
    pub allow_zero_maps: bool,
    /// Evaluates the per-half-step descent inequalities every round.
    #[serde(default = "default_true")]
    pub monitor: bool,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_scalar_bits")]
    pub scalar_bits: u32,
    /// Keeps `(θ, P)` after every round in the run output.
    #[serde(default)]
    pub record_trajectory: bool,
    /// Keeps every individual message in the ledger.
    #[serde(default)]
    pub log_messages: bool,
}

impl TrainerConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        TrainerConfig {
            algorithm,
            lambda: default_lambda(),
            alpha: None,
            eta: None,
            rounds: default_rounds(),
            batch_size: None,
            init: InitSpec::default(),
            seed: 0,
            d_theta: None,
            smoothness: None,
            execution: Execution::default(),
            freeze_maps: false,
            allow_zero_maps: false,
            monitor: true,
            eval_every: default_eval_every(),
            scalar_bits: default_scalar_bits(),
            record_trajectory: false,
            log_messages: false,
        }
    }

    pub fn lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn init(mut self, init: InitSpec) -> Self {
        self.init = init;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(
                "lambda",
                format!("{} must be finite and nonnegative", self.lambda),
            ));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::param("alpha", format!("{a} must be positive")));
            }
        }
        if let Some(e) = self.eta {
            if !(e >= 0.0 && e.is_finite()) {
                return Err(Error::param("eta", format!("{e} must be nonnegative")));
            }
        }
        if self.rounds == 0 {
            return Err(Error::param("rounds", "at least one round is required"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::param("batch_size", "must be positive"));
        }
        for (name, v) in [("d_theta", self.d_theta), ("smoothness", self.smoothness)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::param(name, format!("{v} must be positive")));
                }
            }
        }
        if self.eval_every == 0 {
            return Err(Error::param("eval_every", "must be positive"));
        }
        if self.scalar_bits == 0 {
            return Err(Error::param("scalar_bits", "must be positive"));
        }
        self.init.validate()
    }
}
