//! Simple undirected graphs with canonical edge orientation, and the sheaf
//! dimension data layered on top of them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of a vertex's adjacency list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Incidence {
    pub neighbor: usize,
    /// Index into [`Graph::edges`].
    pub edge: usize,
}

/// A simple undirected graph on vertices `0..n`.
///
/// Edges are stored as `(lo, hi)` with `lo < hi` and sorted, so edge indices
/// are stable for a given edge set. The orientation of edge `e` is
/// `e⁻ = lo`, `e⁺ = hi`. Adjacency lists are sorted by neighbor index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<Incidence>>,
    /// Position of each edge inside the adjacency list of `lo` and `hi`.
    slots: Vec<[usize; 2]>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, duplicate edges and
    /// out-of-range endpoints. Connectivity is not required here.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut canon = Vec::new();
        let mut seen = HashSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) references a vertex outside 0..{n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            canon.push(e);
        }
        canon.sort_unstable();

        let mut adjacency = vec![Vec::new(); n];
        for (idx, &(lo, hi)) in canon.iter().enumerate() {
            adjacency[lo].push(Incidence {
                neighbor: hi,
                edge: idx,
            });
            adjacency[hi].push(Incidence {
                neighbor: lo,
                edge: idx,
            });
        }
        for list in &mut adjacency {
            list.sort_unstable_by_key(|inc| inc.neighbor);
        }
        let mut slots = vec![[0usize; 2]; canon.len()];
        for (v, list) in adjacency.iter().enumerate() {
            for (slot, inc) in list.iter().enumerate() {
                let side = if v == canon[inc.edge].0 { 0 } else { 1 };
                slots[inc.edge][side] = slot;
            }
        }
        Ok(Graph {
            n,
            edges: canon,
            adjacency,
            slots,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonically oriented edges `(e⁻, e⁺) = (min, max)`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn adjacency(&self, v: usize) -> &[Incidence] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    /// Adjacency slots `[slot in e⁻'s list, slot in e⁺'s list]` of edge `e`.
    pub fn edge_slots(&self, e: usize) -> [usize; 2] {
        self.slots[e]
    }

    /// Given the incidence at `slot` of vertex `v`, the slot of `v` in the
    /// neighbor's adjacency list.
    pub fn mirror_slot(&self, v: usize, slot: usize) -> usize {
        let e = self.adjacency[v][slot].edge;
        if self.edges[e].0 == v {
            self.slots[e][1]
        } else {
            self.slots[e][0]
        }
    }

    /// Slot of `neighbor` in the adjacency list of `v`, if adjacent.
    pub fn slot_of(&self, v: usize, neighbor: usize) -> Option<usize> {
        self.adjacency[v]
            .binary_search_by_key(&neighbor, |inc| inc.neighbor)
            .ok()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && b < self.n && self.slot_of(a, b).is_some()
    }

    /// Component label for every vertex, labels assigned in order of first
    /// appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for inc in &self.adjacency[v] {
                    if label[inc.neighbor] == usize::MAX {
                        label[inc.neighbor] = next;
                        stack.push(inc.neighbor);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.n_components() == 1
    }
}

/// How interaction-space dimensions are chosen for each edge.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeDims {
    /// `d_ij = max(1, ⌊γ · min(d_i, d_j)⌋)`, `γ ∈ (0, 1]`.
    Gamma(f64),
    /// One dimension per edge, in [`Graph::edges`] order.
    Explicit(Vec<usize>),
}

/// A graph with per-vertex stalk dimensions `d_i` and per-edge interaction
/// dimensions `d_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SheafGraph {
    graph: Graph,
    stalk_dims: Vec<usize>,
    edge_dims: Vec<usize>,
    offsets: Vec<usize>,
}

/// Interaction dimension for a pair of stalks under the γ rule.
pub fn gamma_edge_dim(gamma: f64, d_i: usize, d_j: usize) -> usize {
    // The epsilon absorbs representation error, e.g. 0.1 * 30 = 3.0000000000000004
    // and 0.29 * 100 = 28.999999999999996.
    let raw = (gamma * d_i.min(d_j) as f64 + 1e-9).floor() as usize;
    raw.max(1)
}

/// Attaches stalk and edge dimensions to a connected graph.
pub fn build_sheaf(
    graph: Graph,
    stalk_dims: Vec<usize>,
    edge_dims: EdgeDims,
) -> Result<SheafGraph> {
    if stalk_dims.len() != graph.n_vertices() {
        return Err(Error::shape(
            "stalk dimensions",
            graph.n_vertices(),
            stalk_dims.len(),
        ));
    }
    if let Some(v) = stalk_dims.iter().position(|&d| d == 0) {
        return Err(Error::param(
            "stalk_dims",
            format!("vertex {v} has dimension 0"),
        ));
    }
    let components = graph.n_components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let dims = match edge_dims {
        EdgeDims::Gamma(gamma) => {
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::param("gamma", format!("{gamma} is outside (0, 1]")));
            }
            graph
                .edges()
                .iter()
                .map(|&(i, j)| gamma_edge_dim(gamma, stalk_dims[i], stalk_dims[j]))
                .collect()
        }
        EdgeDims::Explicit(dims) => {
            if dims.len() != graph.n_edges() {
                return Err(Error::shape("edge dimensions", graph.n_edges(), dims.len()));
            }
            if let Some(e) = dims.iter().position(|&d| d == 0) {
                return Err(Error::param(
                    "edge_dims",
                    format!("edge {e} has dimension 0"),
                ));
            }
            dims
        }
    };
    let mut offsets = Vec::with_capacity(stalk_dims.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for &d in &stalk_dims {
        acc += d;
        offsets.push(acc);
    }
    Ok(SheafGraph {
        graph,
        stalk_dims,
        edge_dims: dims,
        offsets,
    })
}

impl SheafGraph {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n_vertices(&self) -> usize {
        self.graph.n_vertices()
    }

    pub fn n_edges(&self) -> usize {
        self.graph.n_edges()
    }

    pub fn stalk_dims(&self) -> &[usize] {
        &self.stalk_dims
    }

    pub fn stalk_dim(&self, v: usize) -> usize {
        self.stalk_dims[v]
    }

    pub fn edge_dims(&self) -> &[usize] {
        &self.edge_dims
    }

    pub fn edge_dim(&self, e: usize) -> usize {
        self.edge_dims[e]
    }

    /// Total vertex dimension `d = Σ d_i`.
    pub fn total_stalk_dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Total edge dimension `Σ_e d_e`.
    pub fn total_edge_dim(&self) -> usize {
        self.edge_dims.iter().sum()
    }

    /// Start of vertex `v`'s block in the stacked vector.
    pub fn offset(&self, v: usize) -> usize {
        self.offsets[v]
    }

    pub fn edge_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_edges());
        let mut acc = 0;
        for &d in &self.edge_dims {
            out.push(acc);
            acc += d;
        }
        out
    }

    /// Same graph, different edge dimensions.
    pub fn with_edge_dims(&self, edge_dims: EdgeDims) -> Result<SheafGraph> {
        build_sheaf(self.graph.clone(), self.stalk_dims.clone(), edge_dims)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, [(1, 0), (2, 1)]).unwrap()
    }

    #[test]
    fn canonical_orientation() {
        let g = Graph::new(4, [(3, 1), (2, 0), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 3)]);
        assert_eq!(g.adjacency(1)[0].neighbor, 0);
        assert_eq!(g.adjacency(1)[1].neighbor, 3);
        let [s_lo, s_hi] = g.edge_slots(2);
        assert_eq!(g.adjacency(1)[s_lo].edge, 2);
        assert_eq!(g.adjacency(3)[s_hi].edge, 2);
    }

    #[test]
    fn rejects_non_simple() {
        assert!(matches!(
            Graph::new(3, [(1, 1)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(matches!(
            Graph::new(3, [(0, 1), (1, 0)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(Graph::new(3, [(0, 3)]).is_err());
    }

    #[test]
    fn gamma_rule() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let s = build_sheaf(g.clone(), vec![100, 100], EdgeDims::Gamma(0.1)).unwrap();
        assert_eq!(s.edge_dims(), &[10]);
        let s = build_sheaf(g.clone(), vec![20, 30], EdgeDims::Gamma(0.1)).unwrap();
        assert_eq!(s.edge_dims(), &[2]);
        // floor(0.05) = 0, clamped to 1
        let s = build_sheaf(g, vec![5, 5], EdgeDims::Gamma(0.01)).unwrap();
        assert_eq!(s.edge_dims(), &[1]);
    }

    #[test]
    fn gamma_floor_is_exact_on_representable_products() {
        assert_eq!(gamma_edge_dim(0.29, 100, 100), 29);
        assert_eq!(gamma_edge_dim(0.1, 30, 40), 3);
        assert_eq!(gamma_edge_dim(0.25, 80, 80), 20);
        assert_eq!(gamma_edge_dim(1.0, 7, 9), 7);
    }

    #[test]
    fn build_rejections() {
        let g = path3();
        assert!(matches!(
            build_sheaf(g.clone(), vec![2; 3], EdgeDims::Gamma(0.0)),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(build_sheaf(g.clone(), vec![2; 3], EdgeDims::Gamma(1.5)).is_err());
        assert!(build_sheaf(g.clone(), vec![2; 3], EdgeDims::Explicit(vec![1, 0])).is_err());
        assert!(build_sheaf(g.clone(), vec![2; 2], EdgeDims::Gamma(0.5)).is_err());
        let disconnected = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            build_sheaf(disconnected, vec![1; 4], EdgeDims::Gamma(1.0)),
            Err(Error::Disconnected { components: 2 })
        ));
    }

    #[test]
    fn offsets() {
        let s = build_sheaf(path3(), vec![4, 6, 8], EdgeDims::Gamma(0.5)).unwrap();
        assert_eq!(s.total_stalk_dim(), 18);
        assert_eq!(s.offset(2), 10);
        assert_eq!(s.edge_dims(), &[2, 3]);
        assert_eq!(s.edge_offsets(), vec![0, 2]);
    }
}
