//! Running an experiment and collecting its outputs.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::config::{DataConfig, ExperimentConfig};
use super::export::{export_heatmap, file_label, grid_csv, group_norm_means};
use crate::engine::{Trainer, TrainingRun};
use crate::error::{Error, Result};
use crate::exec;
use crate::netsim::{gen_topology, parse_edge_list, write_edge_list, Topology, TopologySpec};
use crate::sheaf::{build_sheaf, EdgeDims};
use crate::tasks::{apply_split, load_csv_federation, standardize, synth_federation, Federation};

/// Data, split and graph shared by every algorithm of one repeat.
#[derive(Debug, Clone)]
pub struct RepeatData {
    pub repeat: usize,
    pub seed: u64,
    pub train: Federation,
    pub test: Federation,
    pub topology: Topology,
    pub reduced: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct RepeatOutcome {
    pub data: RepeatData,
    /// `(label, run)` in config order.
    pub runs: Vec<(String, TrainingRun)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub repeats: Vec<RepeatOutcome>,
}

/// Builds the federation, split and topology for repeat `r`.
pub fn prepare_repeat(config: &ExperimentConfig, r: usize) -> Result<RepeatData> {
    let seed = config.seed.wrapping_add(r as u64);
    let fed = match &config.data {
        DataConfig::Synthetic(spec) => {
            let mut spec = spec.clone();
            spec.seed = spec.seed.wrapping_add(seed);
            synth_federation(&spec)
        }
        DataConfig::Csv(src) => load_csv_federation(src),
    }
    .map_err(|e| e.at("data"))?;
    let mut split = config.split.clone();
    split.seed = split.seed.wrapping_add(seed);
    let out = apply_split(&fed, &split).map_err(|e| e.at("split"))?;
    let (train, test) = if config.standardize {
        standardize(&out.train, &out.test)?
    } else {
        (out.train, out.test)
    };
    let n = train.n_clients();
    let topology = match (&config.topology, &config.edge_list) {
        (Some(kind), _) => {
            gen_topology(&TopologySpec::new(kind.clone(), n, seed)).map_err(|e| e.at("topology"))?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at("edge_list"))?;
            let graph = parse_edge_list(&text).map_err(|e| e.at("edge_list"))?;
            if graph.n_vertices() != n {
                return Err(
                    Error::shape("edge list vertices", n, graph.n_vertices()).at("edge_list")
                );
            }
            if !graph.is_connected() {
                return Err(Error::Disconnected {
                    components: graph.n_components(),
                }
                .at("edge_list"));
            }
            Topology {
                graph,
                attempts: 1,
                repair_edges: Vec::new(),
            }
        }
        (None, None) => unreachable!("validated"),
    };
    Ok(RepeatData {
        repeat: r,
        seed,
        train,
        test,
        topology,
        reduced: out.reduced,
    })
}

fn run_repeat(config: &ExperimentConfig, r: usize) -> Result<RepeatOutcome> {
    let data = prepare_repeat(config, r)?;
    let mut runs = Vec::with_capacity(config.algorithms.len());
    for (k, entry) in config.algorithms.iter().enumerate() {
        let at = format!("algorithms[{k}]");
        let sheaf = build_sheaf(
            data.topology.graph.clone(),
            data.train.model_dims(),
            EdgeDims::Gamma(entry.gamma()),
        )
        .map_err(|e| e.at(&at))?;
        let mut tc = entry.trainer.clone();
        tc.seed = tc.seed.wrapping_add(data.seed);
        tc.init.seed = tc.init.seed.wrapping_add(data.seed);
        tc.eval_every = config.eval_every;
        tc.scalar_bits = config.scalar_bits;
        let run = Trainer::new(&sheaf, &data.train, tc)
            .with_test(&data.test)
            .run()
            .map_err(|e| e.at(&at))?;
        runs.push((entry.label(), run));
    }
    Ok(RepeatOutcome { data, runs })
}

/// Runs every algorithm on every repeat. All algorithms of a repeat share
/// the same split, graph and zero initial models.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let repeats =
        exec::try_map_indexed(config.execution, config.repeats, |r| run_repeat(config, r))?;
    Ok(ExperimentOutcome {
        run_id: config.run_id(),
        config: config.clone(),
        repeats,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl ExperimentOutcome {
    /// One row per (repeat, algorithm, round).
    pub fn metrics_csv(&self) -> String {
        let conv = self.config.bits_convention;
        let mut out = String::from(
            "run_id,repeat,seed,algorithm,round,bits,psi,train_loss,metric_mean,metric_p10,metric_p50,metric_p90,max_theta_norm,max_map_norm\n",
        );
        for rep in &self.repeats {
            for (label, run) in &rep.runs {
                for rec in &run.history {
                    let t = rec.test.as_ref();
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        self.run_id,
                        rep.data.repeat,
                        rep.data.seed,
                        label,
                        rec.round,
                        rec.bits(conv),
                        rec.psi,
                        rec.train_loss,
                        opt(t.map(|m| m.mean)),
                        opt(t.map(|m| m.p10)),
                        opt(t.map(|m| m.p50)),
                        opt(t.map(|m| m.p90)),
                        rec.max_theta_norm,
                        rec.max_map_norm
                    );
                }
            }
        }
        out
    }

    /// Per-round mean and standard error across repeats.
    pub fn aggregate_csv(&self) -> String {
        let conv = self.config.bits_convention;
        let mut out = String::from(
            "algorithm,round,bits_mean,psi_mean,psi_stderr,metric_mean,metric_stderr\n",
        );
        let first = &self.repeats[0];
        for (k, (label, run)) in first.runs.iter().enumerate() {
            for (idx, rec) in run.history.iter().enumerate() {
                let recs: Vec<_> = self
                    .repeats
                    .iter()
                    .map(|r| &r.runs[k].1.history[idx])
                    .collect();
                let bits: Vec<f64> = recs.iter().map(|r| r.bits(conv) as f64).collect();
                let psi: Vec<f64> = recs.iter().map(|r| r.psi).collect();
                let metric: Option<Vec<f64>> = recs
                    .iter()
                    .map(|r| r.test.as_ref().map(|t| t.mean))
                    .collect();
                let (pm, ps) = mean_stderr(&psi);
                let (mm, ms) = match &metric {
                    Some(m) => {
                        let (a, b) = mean_stderr(m);
                        (Some(a), Some(b))
                    }
                    None => (None, None),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    label,
                    rec.round,
                    mean_stderr(&bits).0,
                    pm,
                    ps,
                    opt(mm),
                    opt(ms)
                );
            }
        }
        out
    }

    /// Final mean test metric of `label` in every repeat.
    pub fn final_metrics(&self, label: &str) -> Vec<f64> {
        self.repeats
            .iter()
            .filter_map(|r| r.runs.iter().find(|(l, _)| l == label))
            .filter_map(|(_, run)| run.final_record().test.as_ref().map(|t| t.mean))
            .collect()
    }

    pub fn summary(&self) -> Result<serde_json::Value> {
        #[derive(Serialize)]
        struct AlgSummary {
            label: String,
            algorithm: String,
            lambda: f64,
            gamma: f64,
            alpha: f64,
            eta: f64,
            final_metric_mean: f64,
            final_metric_stderr: f64,
            final_bits: u64,
            hindsight: Vec<crate::engine::Hindsight>,
            rate_check: Vec<Option<crate::engine::RateCheck>>,
            warnings: usize,
            within_group_map_norm: Vec<Option<f64>>,
            cross_group_map_norm: Vec<Option<f64>>,
        }
        let conv = self.config.bits_convention;
        let first = &self.repeats[0];
        let mut algs = Vec::new();
        for (k, (label, run0)) in first.runs.iter().enumerate() {
            let (m, s) = mean_stderr(&self.final_metrics(label));
            let mut hind = Vec::new();
            let mut rates = Vec::new();
            let mut within = Vec::new();
            let mut cross = Vec::new();
            let mut warnings = 0;
            for rep in &self.repeats {
                let run = &rep.runs[k].1;
                let h = run.hindsight()?;
                rates.push(run.rate_check(h.rho));
                hind.push(h);
                warnings += run.events.len();
                if let Some(maps) = &run.maps {
                    let (w, c) = group_norm_means(&run.sheaf, maps, &rep.data.train.groups());
                    within.push(w);
                    cross.push(c);
                }
            }
            algs.push(AlgSummary {
                label: label.clone(),
                algorithm: run0.algorithm.name().to_string(),
                lambda: run0.lambda,
                gamma: self.config.algorithms[k].gamma(),
                alpha: run0.alpha,
                eta: run0.eta,
                final_metric_mean: m,
                final_metric_stderr: s,
                final_bits: run0.final_record().bits(conv),
                hindsight: hind,
                rate_check: rates,
                warnings,
                within_group_map_norm: within,
                cross_group_map_norm: cross,
            });
        }
        let topologies: Vec<_> = self
            .repeats
            .iter()
            .map(|r| {
                json!({
                    "repeat": r.data.repeat,
                    "seed": r.data.seed,
                    "edges": r.data.topology.graph.n_edges(),
                    "attempts": r.data.topology.attempts,
                    "repaired": r.data.topology.repaired(),
                })
            })
            .collect();
        Ok(json!({
            "run_id": self.run_id,
            "name": self.config.name,
            "seed": self.config.seed,
            "repeats": self.config.repeats,
            "bits_convention": self.config.bits_convention,
            "scalar_bits": self.config.scalar_bits,
            "n_clients": first.data.train.n_clients(),
            "model_dims": first.data.train.model_dims(),
            "reduced_clients": first.data.reduced.iter().filter(|&&r| r).count(),
            "topologies": topologies,
            "algorithms": algs,
        }))
    }

    /// Writes `metrics.csv`, `summary.json`, the aggregate table (when
    /// repeated) and per-run ledgers, heatmaps and edge lists into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        if self.repeats.len() > 1 {
            std::fs::write(dir.join("metrics_aggregate.csv"), self.aggregate_csv())?;
        }
        let summary = serde_json::to_string_pretty(&self.summary()?)?;
        std::fs::write(dir.join("summary.json"), summary + "\n")?;
        for rep in &self.repeats {
            let r = rep.data.repeat;
            std::fs::write(
                dir.join(format!("topology_r{r}.txt")),
                write_edge_list(&rep.data.topology.graph),
            )?;
            for (label, run) in &rep.runs {
                let name = file_label(label);
                let file = std::fs::File::create(dir.join(format!("ledger_{name}_r{r}.csv")))?;
                run.ledger
                    .write_csv(std::io::BufWriter::new(file), self.config.bits_convention)?;
                if let Some(maps) = &run.maps {
                    std::fs::write(
                        dir.join(format!("heatmap_{name}_r{r}.csv")),
                        grid_csv(&export_heatmap(&run.sheaf, maps)),
                    )?;
                }
            }
        }
        Ok(())
    }
}
