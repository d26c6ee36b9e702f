#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sheaf_fmtl::engine::{objective_psi, TrainerConfig};
use sheaf_fmtl::sheaf::{build_sheaf, EdgeDims, Graph, RestrictionMaps, Section, SheafGraph};
use sheaf_fmtl::tasks::{ClientData, Federation, LossKind, Targets};

pub fn rng(seed: u64) -> ChaCha8Rng {
    sheaf_fmtl::rng::stream(seed, 99)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random spanning tree plus extra edges with probability `extra`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra: f64) -> Graph {
    let mut edges = Vec::new();
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < extra && !edges.contains(&(a, b)) {
                edges.push((a, b));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Connected sheaf with `2..=max_n` vertices, stalks in `1..=max_d` and
/// edge stalks in `1..=max_edge`.
pub fn random_sheaf(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    max_d: usize,
    max_edge: usize,
) -> SheafGraph {
    let n = rng.random_range(2..=max_n);
    let g = random_graph(rng, n, 0.3);
    let dims = (0..n).map(|_| rng.random_range(1..=max_d)).collect();
    let edge = (0..g.n_edges())
        .map(|_| rng.random_range(1..=max_edge))
        .collect();
    build_sheaf(g, dims, EdgeDims::Explicit(edge)).unwrap()
}

pub fn random_maps(rng: &mut ChaCha8Rng, sheaf: &SheafGraph) -> RestrictionMaps {
    RestrictionMaps::from_fn(sheaf, |_, _, r, c| {
        DMatrix::from_fn(r, c, |_, _| gauss(rng))
    })
}

pub fn random_section(rng: &mut ChaCha8Rng, sheaf: &SheafGraph) -> Section {
    Section(
        (0..sheaf.n_vertices())
            .map(|v| DVector::from_fn(sheaf.stalk_dim(v), |_, _| gauss(rng)))
            .collect(),
    )
}

/// Regression clients whose feature count equals the stalk dimension.
pub fn regression_fed(rng: &mut ChaCha8Rng, dims: &[usize], samples: usize, l2: f64) -> Federation {
    let clients = dims
        .iter()
        .map(|&d| {
            let x = DMatrix::from_fn(samples, d, |_, _| gauss(rng));
            let w = DVector::from_fn(d, |_, _| gauss(rng));
            let y = (&x * &w).map(|v| v + 0.1 * gauss(rng));
            ClientData::new(
                x,
                Targets::Real(y.iter().copied().collect()),
                LossKind::LinearRegression,
                l2,
            )
            .unwrap()
        })
        .collect();
    Federation::new(clients).unwrap()
}

/// Softmax clients with `classes` classes; stalk `d` must be divisible by
/// `classes`.
pub fn multinomial_fed(
    rng: &mut ChaCha8Rng,
    dims: &[usize],
    classes: usize,
    samples: usize,
    l2: f64,
) -> Federation {
    let clients = dims
        .iter()
        .map(|&d| {
            let p = d / classes;
            let x = DMatrix::from_fn(samples, p, |_, _| gauss(rng));
            let y = (0..samples).map(|_| rng.random_range(0..classes)).collect();
            ClientData::new(x, Targets::Labels(y), LossKind::Multinomial { classes }, l2).unwrap()
        })
        .collect();
    Federation::new(clients).unwrap()
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

/// Central finite differences of Ψ with respect to every model coordinate.
pub fn fd_grad_theta(
    sheaf: &SheafGraph,
    fed: &Federation,
    theta: &Section,
    maps: &RestrictionMaps,
    lambda: f64,
    h: f64,
) -> Section {
    let mut out = Section::zeros(sheaf);
    for v in 0..sheaf.n_vertices() {
        for k in 0..sheaf.stalk_dim(v) {
            let mut plus = theta.clone();
            plus.0[v][k] += h;
            let mut minus = theta.clone();
            minus.0[v][k] -= h;
            let fp = objective_psi(sheaf, fed, &plus, maps, lambda).unwrap();
            let fm = objective_psi(sheaf, fed, &minus, maps, lambda).unwrap();
            out.0[v][k] = (fp - fm) / (2.0 * h);
        }
    }
    out
}

/// Central finite differences of Ψ with respect to every map entry.
pub fn fd_grad_p(
    sheaf: &SheafGraph,
    fed: &Federation,
    theta: &Section,
    maps: &RestrictionMaps,
    lambda: f64,
    h: f64,
) -> RestrictionMaps {
    let mut out = RestrictionMaps::zeros(sheaf);
    for v in 0..maps.per_vertex.len() {
        for s in 0..maps.per_vertex[v].len() {
            let (r, c) = maps.per_vertex[v][s].shape();
            for a in 0..r {
                for b in 0..c {
                    let mut plus = maps.clone();
                    plus.per_vertex[v][s][(a, b)] += h;
                    let mut minus = maps.clone();
                    minus.per_vertex[v][s][(a, b)] -= h;
                    let fp = objective_psi(sheaf, fed, theta, &plus, lambda).unwrap();
                    let fm = objective_psi(sheaf, fed, theta, &minus, lambda).unwrap();
                    out.per_vertex[v][s][(a, b)] = (fp - fm) / (2.0 * h);
                }
            }
        }
    }
    out
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub fn flat_maps(m: &RestrictionMaps) -> Vec<f64> {
    m.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Full-batch config with explicit steps and no evaluation overhead.
pub fn fixed_config(cfg: TrainerConfig, alpha: f64, eta: f64) -> TrainerConfig {
    let mut c = cfg.alpha(alpha).eta(eta);
    c.record_trajectory = true;
    c
}
