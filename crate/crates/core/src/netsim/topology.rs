//! Seeded random topologies with connectivity enforcement.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::sheaf::Graph;

/// Resampling attempts before falling back to edge repair.
pub const MAX_RESAMPLES: u64 = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TopologyKind {
    ErdosRenyi {
        p: f64,
    },
    /// Ring lattice with `k` nearest neighbors (k even), each edge rewired
    /// with probability `p_rewire`.
    WattsStrogatz {
        k: usize,
        p_rewire: f64,
    },
    /// Preferential attachment with `m` edges per new vertex, seeded by a
    /// complete graph on `m + 1` vertices.
    BarabasiAlbert {
        m: usize,
    },
    Complete,
    /// Vertex 0 is the hub.
    Star,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    #[serde(flatten)]
    pub kind: TopologyKind,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

/// A generated topology and how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub graph: Graph,
    /// Number of samples drawn (1 when the first sample was connected).
    pub attempts: u64,
    /// Edges added to join components after exhausting resamples.
    pub repair_edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn repaired(&self) -> bool {
        !self.repair_edges.is_empty()
    }
}

impl TopologySpec {
    pub fn new(kind: TopologyKind, n: usize, seed: u64) -> Self {
        TopologySpec { kind, n, seed }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::param("n", "topology needs at least 2 vertices"));
        }
        match self.kind {
            TopologyKind::ErdosRenyi { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::param("p", format!("{p} is outside (0, 1]")));
                }
            }
            TopologyKind::WattsStrogatz { k, p_rewire } => {
                if k >= n {
                    return Err(Error::param("k", format!("k = {k} must be below n = {n}")));
                }
                if k < 2 || k % 2 != 0 {
                    return Err(Error::param(
                        "k",
                        format!("k = {k} must be even and at least 2"),
                    ));
                }
                if !(0.0..=1.0).contains(&p_rewire) {
                    return Err(Error::param(
                        "p_rewire",
                        format!("{p_rewire} is outside [0, 1]"),
                    ));
                }
            }
            TopologyKind::BarabasiAlbert { m } => {
                if m == 0 || m >= n {
                    return Err(Error::param("m", format!("m = {m} must be in [1, n)")));
                }
            }
            TopologyKind::Complete | TopologyKind::Star => {}
        }
        Ok(())
    }
}

fn erdos_renyi(n: usize, p: f64, rng: &mut ChaCha8Rng) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.insert((i, j));
            }
        }
    }
    edges
}

fn watts_strogatz(n: usize, k: usize, p: f64, rng: &mut ChaCha8Rng) -> BTreeSet<(usize, usize)> {
    let canon = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut edges = BTreeSet::new();
    for i in 0..n {
        for s in 1..=k / 2 {
            edges.insert(canon(i, (i + s) % n));
        }
    }
    for s in 1..=k / 2 {
        for i in 0..n {
            let old = canon(i, (i + s) % n);
            if rng.random::<f64>() >= p || !edges.contains(&old) {
                continue;
            }
            let candidates: Vec<usize> = (0..n)
                .filter(|&t| t != i && !edges.contains(&canon(i, t)))
                .collect();
            if let Some(&t) = candidates.choose(rng) {
                edges.remove(&old);
                edges.insert(canon(i, t));
            }
        }
    }
    edges
}

fn barabasi_albert(n: usize, m: usize, rng: &mut ChaCha8Rng) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    // Every vertex appears once per incident edge.
    let mut pool = Vec::new();
    let core = m + 1;
    for i in 0..core {
        for j in i + 1..core {
            edges.insert((i, j));
            pool.push(i);
            pool.push(j);
        }
    }
    for v in core..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            targets.insert(*pool.choose(rng).expect("non-empty pool"));
        }
        for &t in &targets {
            edges.insert((t, v));
            pool.push(t);
            pool.push(v);
        }
    }
    edges
}

fn sample(spec: &TopologySpec, rng: &mut ChaCha8Rng) -> BTreeSet<(usize, usize)> {
    let n = spec.n;
    match spec.kind {
        TopologyKind::ErdosRenyi { p } => erdos_renyi(n, p, rng),
        TopologyKind::WattsStrogatz { k, p_rewire } => watts_strogatz(n, k, p_rewire, rng),
        TopologyKind::BarabasiAlbert { m } => barabasi_albert(n, m, rng),
        TopologyKind::Complete => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
        TopologyKind::Star => (1..n).map(|j| (0, j)).collect(),
    }
}

/// Draws a connected simple graph. Disconnected samples are redrawn from a
/// fresh sub-stream up to [`MAX_RESAMPLES`] times; after that the remaining
/// components are joined by one edge each between random representatives.
pub fn gen_topology(spec: &TopologySpec) -> Result<Topology> {
    spec.validate()?;
    let mut last = None;
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = rng::stream(spec.seed.wrapping_add(attempt), rng::TOPOLOGY);
        let graph = Graph::new(spec.n, sample(spec, &mut rng))?;
        if graph.is_connected() {
            return Ok(Topology {
                graph,
                attempts: attempt + 1,
                repair_edges: Vec::new(),
            });
        }
        last = Some(graph);
    }
    let graph = last.expect("at least one sample");
    let labels = graph.components();
    let n_comp = labels.iter().max().unwrap() + 1;
    let mut members = vec![Vec::new(); n_comp];
    for (v, &c) in labels.iter().enumerate() {
        members[c].push(v);
    }
    let mut rng = rng::stream(spec.seed, rng::REPAIR);
    let mut joined = members[0].clone();
    let mut repair = Vec::new();
    for comp in &members[1..] {
        let a = *joined.choose(&mut rng).unwrap();
        let b = *comp.choose(&mut rng).unwrap();
        repair.push((a.min(b), a.max(b)));
        joined.extend_from_slice(comp);
    }
    let graph = Graph::new(
        spec.n,
        graph.edges().iter().copied().chain(repair.iter().copied()),
    )?;
    debug_assert!(graph.is_connected());
    Ok(Topology {
        graph,
        attempts: MAX_RESAMPLES,
        repair_edges: repair,
    })
}

/// Edge-list text: a `n <vertices>` line followed by one `i j` line per
/// edge. Blank lines and lines starting with `#` are ignored.
pub fn write_edge_list(graph: &Graph) -> String {
    let mut out = format!("n {}\n", graph.n_vertices());
    for &(a, b) in graph.edges() {
        out.push_str(&format!("{a} {b}\n"));
    }
    out
}

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut n = None;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Error::Parse(format!("edge list line {}: `{line}`", lineno + 1));
        let mut parts = line.split_whitespace();
        let first = parts.next().ok_or_else(bad)?;
        if first == "n" {
            n = Some(
                parts
                    .next()
                    .ok_or_else(bad)?
                    .parse::<usize>()
                    .map_err(|_| bad())?,
            );
            continue;
        }
        let a: usize = first.parse().map_err(|_| bad())?;
        let b: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() {
            return Err(bad());
        }
        edges.push((a, b));
    }
    let n = n.ok_or_else(|| Error::Parse("edge list is missing the `n <vertices>` line".into()))?;
    Graph::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_and_star() {
        let t = gen_topology(&TopologySpec::new(TopologyKind::Complete, 4, 0)).unwrap();
        assert_eq!(t.graph.n_edges(), 6);
        let s = gen_topology(&TopologySpec::new(TopologyKind::Star, 5, 0)).unwrap();
        assert_eq!(s.graph.n_edges(), 4);
        let deg: Vec<_> = (0..5).map(|v| s.graph.degree(v)).collect();
        assert_eq!(deg, vec![4, 1, 1, 1, 1]);
    }

    #[test]
    fn every_kind_is_connected_and_seeded() {
        let kinds = [
            TopologyKind::ErdosRenyi { p: 0.15 },
            TopologyKind::WattsStrogatz {
                k: 4,
                p_rewire: 0.1,
            },
            TopologyKind::BarabasiAlbert { m: 2 },
            TopologyKind::Complete,
            TopologyKind::Star,
        ];
        for kind in kinds {
            for seed in 0..5 {
                let spec = TopologySpec::new(kind.clone(), 20, seed);
                let a = gen_topology(&spec).unwrap();
                assert!(a.graph.is_connected());
                assert_eq!(a, gen_topology(&spec).unwrap());
            }
        }
    }

    #[test]
    fn barabasi_albert_edge_count() {
        let t = gen_topology(&TopologySpec::new(
            TopologyKind::BarabasiAlbert { m: 2 },
            20,
            4,
        ))
        .unwrap();
        // C(3,2) core edges plus m per added vertex
        assert_eq!(t.graph.n_edges(), 3 + 2 * 17);
    }

    #[test]
    fn watts_strogatz_preserves_edge_count() {
        let t = gen_topology(&TopologySpec::new(
            TopologyKind::WattsStrogatz {
                k: 4,
                p_rewire: 0.3,
            },
            20,
            9,
        ))
        .unwrap();
        assert_eq!(t.graph.n_edges(), 40);
    }

    #[test]
    fn sparse_er_gets_repaired() {
        let t = gen_topology(&TopologySpec::new(
            TopologyKind::ErdosRenyi { p: 0.01 },
            30,
            2,
        ))
        .unwrap();
        assert!(t.repaired());
        assert!(t.graph.is_connected());
        assert_eq!(t.attempts, MAX_RESAMPLES);
    }

    #[test]
    fn invalid_parameters() {
        let bad = [
            TopologySpec::new(TopologyKind::ErdosRenyi { p: 0.0 }, 10, 0),
            TopologySpec::new(TopologyKind::ErdosRenyi { p: 1.2 }, 10, 0),
            TopologySpec::new(
                TopologyKind::WattsStrogatz {
                    k: 10,
                    p_rewire: 0.1,
                },
                10,
                0,
            ),
            TopologySpec::new(TopologyKind::BarabasiAlbert { m: 10 }, 10, 0),
            TopologySpec::new(TopologyKind::Complete, 1, 0),
        ];
        for spec in bad {
            assert!(
                matches!(gen_topology(&spec), Err(Error::InvalidParameter { .. })),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn edge_list_text() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let text = write_edge_list(&g);
        assert_eq!(text, "n 4\n0 1\n1 2\n2 3\n");
        assert_eq!(parse_edge_list(&format!("# comment\n{text}\n")).unwrap(), g);
        assert!(parse_edge_list("0 1\n").is_err());
        assert!(parse_edge_list("n 2\n0 x\n").is_err());
    }
}
