use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sheaf_fmtl::engine::{init_maps, Algorithm, InitSpec};
use sheaf_fmtl::experiment::{
    ablation_csv, prepare_repeat, run_ablation, run_experiment, AblationSpec, ExperimentConfig,
    DEFAULT_GAMMA,
};
use sheaf_fmtl::netsim::{bits_per_round, write_edge_list, BitsConvention};
use sheaf_fmtl::sheaf::io::SheafDocument;
use sheaf_fmtl::sheaf::{build_sheaf, EdgeDims};
use sheaf_fmtl::tasks::write_client_csv;
use sheaf_fmtl::Execution;

#[derive(Parser)]
#[command(
    name = "sheaf-fmtl",
    version,
    about = "Decentralized multi-task learning with learned sheaf coupling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every algorithm of an experiment config and write the results.
    Run(RunArgs),
    /// Materialize the federation and graph of a config as CSV files.
    GenData(GenDataArgs),
    /// Print the sheaf a config would train on, optionally as JSON.
    InspectSheaf(InspectArgs),
    /// Topology × λ grid for the sheaf method and the fixed-coupling baseline.
    Ablation(AblationArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory; defaults to `<output_dir>/<name>-seed<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Run clients one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct GenDataArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    repeat: usize,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: Common,
    /// Edge-dimension ratio; defaults to the first sheaf-fmtl entry's.
    #[arg(long)]
    gamma: Option<f64>,
    /// Include the initial restriction maps in the JSON document.
    #[arg(long)]
    with_maps: bool,
    /// Write the sheaf document here instead of printing a summary only.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblationArgs {
    /// Ablation spec (TOML); the built-in grid when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shifts every seed of the grid by this amount.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long, default_value = "results/ablation")]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::GenData(a) => gen_data(a),
        Command::InspectSheaf(a) => inspect(a),
        Command::Ablation(a) => ablation(a),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = args.common.load()?;
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if args.sequential {
        cfg.execution = Execution::Sequential;
        for a in &mut cfg.algorithms {
            a.trainer.execution = Execution::Sequential;
        }
    }
    let out_dir = args
        .out
        .unwrap_or_else(|| cfg.output_dir.join(cfg.run_id()));
    let outcome = run_experiment(&cfg)?;
    outcome
        .write(&out_dir)
        .with_context(|| format!("writing {}", out_dir.display()))?;
    println!(
        "{} ({} repeat(s)) -> {}",
        outcome.run_id,
        cfg.repeats,
        out_dir.display()
    );
    for (label, run) in &outcome.repeats[0].runs {
        let finals = outcome.final_metrics(label);
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!(
            "  {label:<16} metric {mean:.4}  bits {}  psi {:.6e}  warnings {}",
            run.final_record().bits(cfg.bits_convention),
            run.final_record().psi,
            run.events.len()
        );
    }
    Ok(())
}

fn write_federation(dir: &Path, fed: &sheaf_fmtl::tasks::Federation) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (i, c) in fed.clients.iter().enumerate() {
        write_client_csv(&dir.join(format!("client_{i:03}.csv")), c)?;
    }
    Ok(())
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let cfg = args.common.load()?;
    if args.repeat >= cfg.repeats {
        bail!(
            "repeat {} out of range (config has {})",
            args.repeat,
            cfg.repeats
        );
    }
    let data = prepare_repeat(&cfg, args.repeat)?;
    write_federation(&args.out.join("train"), &data.train)?;
    write_federation(&args.out.join("test"), &data.test)?;
    fs::write(
        args.out.join("topology.txt"),
        write_edge_list(&data.topology.graph),
    )?;
    let manifest = json!({
        "seed": data.seed,
        "n_clients": data.train.n_clients(),
        "model_dims": data.train.model_dims(),
        "groups": data.train.groups(),
        "reduced": data.reduced,
        "edges": data.topology.graph.n_edges(),
        "repaired": data.topology.repaired(),
    });
    fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    println!(
        "{} clients, {} edges -> {}",
        data.train.n_clients(),
        data.topology.graph.n_edges(),
        args.out.display()
    );
    Ok(())
}

fn inspect(args: InspectArgs) -> Result<()> {
    let cfg = args.common.load()?;
    let data = prepare_repeat(&cfg, 0)?;
    let entry = cfg
        .algorithms
        .iter()
        .find(|a| a.trainer.algorithm == Algorithm::SheafFmtl);
    let gamma = args
        .gamma
        .or(entry.map(|e| e.gamma()))
        .unwrap_or(DEFAULT_GAMMA);
    let sheaf = build_sheaf(
        data.topology.graph.clone(),
        data.train.model_dims(),
        EdgeDims::Gamma(gamma),
    )?;
    let g = sheaf.graph();
    let degrees: Vec<usize> = (0..g.n_vertices()).map(|v| g.degree(v)).collect();
    println!("vertices       {}", g.n_vertices());
    println!("edges          {}", g.n_edges());
    println!(
        "degree         min {} max {}",
        degrees.iter().min().unwrap(),
        degrees.iter().max().unwrap()
    );
    println!(
        "stalk dims     total {} {:?}",
        sheaf.total_stalk_dim(),
        sheaf.stalk_dims()
    );
    println!(
        "edge dims      total {} (gamma {gamma})",
        sheaf.total_edge_dim()
    );
    println!("scalars per round (first exchange / all exchanges):");
    for alg in Algorithm::ALL {
        let uniform = sheaf.stalk_dims().iter().all(|&d| d == sheaf.stalk_dim(0));
        if !uniform && matches!(alg, Algorithm::Dfedu | Algorithm::Dpsgd) {
            continue;
        }
        let cost = bits_per_round(&sheaf, alg, cfg.scalar_bits);
        let total = |c| cost.scalars(c).iter().sum::<u64>();
        println!(
            "  {:<12} {} / {}",
            alg.name(),
            total(BitsConvention::FirstExchange),
            total(BitsConvention::Exact)
        );
    }
    if let Some(path) = args.out {
        let maps = if args.with_maps {
            let mut init = entry
                .map(|e| e.trainer.init)
                .unwrap_or_else(InitSpec::default);
            init.seed = init.seed.wrapping_add(data.seed);
            Some(init_maps(&init, &sheaf)?)
        } else {
            None
        };
        let doc = SheafDocument::from_sheaf(&sheaf, maps.as_ref());
        fs::write(&path, doc.to_json()? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        println!("sheaf document -> {}", path.display());
    }
    Ok(())
}

fn ablation(args: AblationArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(p) => AblationSpec::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => AblationSpec::default(),
    };
    if let Some(shift) = args.seed {
        spec.seeds
            .iter_mut()
            .for_each(|s| *s = s.wrapping_add(shift));
    }
    if let Some(r) = args.rounds {
        spec.rounds = r;
    }
    let rows = run_ablation(&spec)?;
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("ablation.csv"), ablation_csv(&rows))?;
    fs::write(args.out.join("spec.toml"), spec.to_toml_string()?)?;
    for r in &rows {
        println!(
            "{:<28} {:<11} λ={:<8} metric {:.4} ± {:.4}  bits {:.0}",
            r.topology, r.algorithm, r.lambda, r.metric_mean, r.metric_stderr, r.bits
        );
    }
    println!("-> {}", args.out.join("ablation.csv").display());
    Ok(())
}
