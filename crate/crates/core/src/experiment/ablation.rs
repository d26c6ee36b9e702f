//! Topology × λ grid comparing the sheaf method against the fixed-coupling
//! baseline.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Algorithm, InitSpec, Trainer, TrainerConfig};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::netsim::{gen_topology, BitsConvention, TopologyKind, TopologySpec};
use crate::sheaf::{build_sheaf, EdgeDims};
use crate::tasks::{
    apply_split, standardize, synth_federation, Federation, Heterogeneity, SplitSpec, SynthSpec,
    TaskSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub data: SynthSpec,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub standardize: bool,
    pub topologies: Vec<TopologyKind>,
    pub lambdas: Vec<f64>,
    pub gamma: f64,
    pub rounds: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub bits_convention: BitsConvention,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for AblationSpec {
    /// Small-world (k = 4, p = 0.1), scale-free (m = 2) and complete graphs
    /// over λ ∈ {1e-4, …, 10} on a 4-group rotated classification task.
    fn default() -> Self {
        AblationSpec {
            data: SynthSpec::new(
                Heterogeneity::FeatureRotationGroups { groups: 4 },
                20,
                20,
                TaskSpec::Classification { classes: 4 },
                100,
                0,
            ),
            split: SplitSpec::default(),
            standardize: false,
            topologies: vec![
                TopologyKind::WattsStrogatz {
                    k: 4,
                    p_rewire: 0.1,
                },
                TopologyKind::BarabasiAlbert { m: 2 },
                TopologyKind::Complete,
            ],
            lambdas: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            gamma: 0.25,
            rounds: 100,
            seeds: vec![0, 1, 2],
            init: InitSpec::default(),
            bits_convention: BitsConvention::FirstExchange,
            execution: Execution::Parallel,
        }
    }
}

impl AblationSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: AblationSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| e.at(path.display().to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.topologies.is_empty() || self.lambdas.is_empty() || self.seeds.is_empty() {
            return Err(Error::param(
                "ablation",
                "topologies, lambdas and seeds must be non-empty",
            ));
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::param(
                "lambdas",
                "every λ must be finite and nonnegative",
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::param(
                "gamma",
                format!("{} is outside (0, 1]", self.gamma),
            ));
        }
        if self.rounds == 0 {
            return Err(Error::param("rounds", "must be positive"));
        }
        Ok(())
    }
}

pub fn topology_label(kind: &TopologyKind) -> String {
    match kind {
        TopologyKind::ErdosRenyi { p } => format!("erdos-renyi(p={p})"),
        TopologyKind::WattsStrogatz { k, p_rewire } => format!("small-world(k={k},p={p_rewire})"),
        TopologyKind::BarabasiAlbert { m } => format!("scale-free(m={m})"),
        TopologyKind::Complete => "complete".into(),
        TopologyKind::Star => "star".into(),
    }
}

/// Seed-averaged result of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub topology: String,
    pub algorithm: Algorithm,
    pub lambda: f64,
    pub metric_mean: f64,
    pub metric_stderr: f64,
    /// Total bits after the last round, averaged over seeds.
    pub bits: f64,
}

pub fn run_ablation(spec: &AblationSpec) -> Result<Vec<AblationRow>> {
    spec.validate()?;
    let data: Vec<(Federation, Federation)> = spec
        .seeds
        .iter()
        .map(|&seed| {
            let mut d = spec.data.clone();
            d.seed = d.seed.wrapping_add(seed);
            let fed = synth_federation(&d)?;
            let mut split = spec.split.clone();
            split.seed = split.seed.wrapping_add(seed);
            let out = apply_split(&fed, &split)?;
            if spec.standardize {
                standardize(&out.train, &out.test)
            } else {
                Ok((out.train, out.test))
            }
        })
        .collect::<Result<_>>()?;
    let algs = [Algorithm::SheafFmtl, Algorithm::Dfedu];
    let mut cells = Vec::new();
    for (t, _) in spec.topologies.iter().enumerate() {
        for algorithm in algs {
            for (l, _) in spec.lambdas.iter().enumerate() {
                for s in 0..spec.seeds.len() {
                    cells.push((t, algorithm, l, s));
                }
            }
        }
    }
    let results = exec::try_map_indexed(spec.execution, cells.len(), |c| {
        let (t, algorithm, l, s) = cells[c];
        let seed = spec.seeds[s];
        let (train, test) = &data[s];
        let topo = gen_topology(&TopologySpec::new(
            spec.topologies[t].clone(),
            train.n_clients(),
            seed,
        ))?;
        let gamma = if algorithm == Algorithm::SheafFmtl {
            spec.gamma
        } else {
            1.0
        };
        let sheaf = build_sheaf(topo.graph, train.model_dims(), EdgeDims::Gamma(gamma))?;
        let mut cfg = TrainerConfig::new(algorithm)
            .lambda(spec.lambdas[l])
            .rounds(spec.rounds);
        cfg.init = spec.init;
        cfg.init.seed = cfg.init.seed.wrapping_add(seed);
        cfg.seed = seed;
        cfg.eval_every = spec.rounds;
        cfg.monitor = false;
        cfg.execution = Execution::Sequential;
        let run = Trainer::new(&sheaf, train, cfg).with_test(test).run()?;
        let rec = run.final_record();
        Ok::<_, crate::Error>((
            rec.test.as_ref().map_or(f64::NAN, |m| m.mean),
            rec.bits(spec.bits_convention) as f64,
        ))
    })?;
    let mut rows = Vec::new();
    let per_cell = spec.seeds.len();
    for (chunk_idx, chunk) in results.chunks(per_cell).enumerate() {
        let (t, algorithm, l, _) = cells[chunk_idx * per_cell];
        let metrics: Vec<f64> = chunk.iter().map(|r| r.0).collect();
        let n = metrics.len() as f64;
        let mean = metrics.iter().sum::<f64>() / n;
        let stderr = if metrics.len() > 1 {
            (metrics.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        rows.push(AblationRow {
            topology: topology_label(&spec.topologies[t]),
            algorithm,
            lambda: spec.lambdas[l],
            metric_mean: mean,
            metric_stderr: stderr,
            bits: chunk.iter().map(|r| r.1).sum::<f64>() / n,
        });
    }
    Ok(rows)
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("topology,algorithm,lambda,metric_mean,metric_stderr,bits\n");
    for r in rows {
        let _ = writeln!(
            out,
            "\"{}\",{},{},{},{},{}",
            r.topology, r.algorithm, r.lambda, r.metric_mean, r.metric_stderr, r.bits
        );
    }
    out
}
