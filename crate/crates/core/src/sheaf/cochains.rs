//! Vertex cochains (sections), edge cochains and restriction maps.

use nalgebra::{DMatrix, DVector};

use super::graph::SheafGraph;
use crate::error::{Error, Result};

/// Stacked per-vertex vectors `θ = (θ_1, …, θ_N)`, an element of `C⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct Section(pub Vec<DVector<f64>>);

/// Stacked per-edge vectors, an element of `C¹`, in edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVector(pub Vec<DVector<f64>>);

impl Section {
    pub fn zeros(sheaf: &SheafGraph) -> Self {
        Section(
            sheaf
                .stalk_dims()
                .iter()
                .map(|&d| DVector::zeros(d))
                .collect(),
        )
    }

    /// Splits a flat vector of length `Σ d_i` into blocks.
    pub fn from_flat(sheaf: &SheafGraph, flat: &[f64]) -> Result<Self> {
        if flat.len() != sheaf.total_stalk_dim() {
            return Err(Error::shape(
                "flat section",
                sheaf.total_stalk_dim(),
                flat.len(),
            ));
        }
        Ok(Section(
            (0..sheaf.n_vertices())
                .map(|v| {
                    let off = sheaf.offset(v);
                    DVector::from_column_slice(&flat[off..off + sheaf.stalk_dim(v)])
                })
                .collect(),
        ))
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let total = self.0.iter().map(|b| b.len()).sum();
        let mut out = DVector::zeros(total);
        let mut off = 0;
        for b in &self.0 {
            out.rows_mut(off, b.len()).copy_from(b);
            off += b.len();
        }
        out
    }

    pub fn block(&self, v: usize) -> &DVector<f64> {
        &self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|b| b.norm_squared()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot(&self, other: &Section) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.dot(b)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// Largest absolute elementwise difference; blocks must have equal shapes.
    pub fn max_abs_diff(&self, other: &Section) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Checks that block lengths match the stalk dimensions.
    pub fn check(&self, sheaf: &SheafGraph) -> Result<()> {
        if self.0.len() != sheaf.n_vertices() {
            return Err(Error::shape(
                "section blocks",
                sheaf.n_vertices(),
                self.0.len(),
            ));
        }
        for (v, b) in self.0.iter().enumerate() {
            if b.len() != sheaf.stalk_dim(v) {
                return Err(Error::shape(
                    format!("section block {v}"),
                    sheaf.stalk_dim(v),
                    b.len(),
                ));
            }
        }
        Ok(())
    }
}

impl EdgeVector {
    pub fn zeros(sheaf: &SheafGraph) -> Self {
        EdgeVector(
            sheaf
                .edge_dims()
                .iter()
                .map(|&d| DVector::zeros(d))
                .collect(),
        )
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let total = self.0.iter().map(|b| b.len()).sum();
        let mut out = DVector::zeros(total);
        let mut off = 0;
        for b in &self.0 {
            out.rows_mut(off, b.len()).copy_from(b);
            off += b.len();
        }
        out
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|b| b.norm_squared()).sum()
    }
}

/// The restriction maps `P_ij` (shape `d_ij × d_i`) for every incidence.
///
/// Maps are owned by the vertex they act on: `per_vertex[i][slot]` is the map
/// from vertex `i` to the edge at position `slot` of `i`'s adjacency list.
/// This is the layout a decentralized client holds locally.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictionMaps {
    pub per_vertex: Vec<Vec<DMatrix<f64>>>,
}

impl RestrictionMaps {
    /// Builds every map with `f(i, j, d_ij, d_i)`.
    pub fn from_fn<F>(sheaf: &SheafGraph, mut f: F) -> Self
    where
        F: FnMut(usize, usize, usize, usize) -> DMatrix<f64>,
    {
        let g = sheaf.graph();
        let per_vertex = (0..g.n_vertices())
            .map(|i| {
                g.adjacency(i)
                    .iter()
                    .map(|inc| {
                        f(
                            i,
                            inc.neighbor,
                            sheaf.edge_dim(inc.edge),
                            sheaf.stalk_dim(i),
                        )
                    })
                    .collect()
            })
            .collect();
        RestrictionMaps { per_vertex }
    }

    pub fn zeros(sheaf: &SheafGraph) -> Self {
        Self::from_fn(sheaf, |_, _, r, c| DMatrix::zeros(r, c))
    }

    /// `P_ij` for the incidence at adjacency position `slot` of vertex `i`.
    pub fn get(&self, i: usize, slot: usize) -> &DMatrix<f64> {
        &self.per_vertex[i][slot]
    }

    /// `(P_{e⁻ e⁺}, P_{e⁺ e⁻})` for edge `e`.
    pub fn edge_pair(&self, sheaf: &SheafGraph, e: usize) -> (&DMatrix<f64>, &DMatrix<f64>) {
        let (lo, hi) = sheaf.graph().edges()[e];
        let [s_lo, s_hi] = sheaf.graph().edge_slots(e);
        (&self.per_vertex[lo][s_lo], &self.per_vertex[hi][s_hi])
    }

    /// `P_ij` by vertex pair, if `(i, j)` is an edge.
    pub fn between(&self, sheaf: &SheafGraph, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        sheaf.graph().slot_of(i, j).map(|s| &self.per_vertex[i][s])
    }

    pub fn iter(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.per_vertex.iter().flatten()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|m| m.iter().all(|x| x.is_finite()))
    }

    /// Squared Frobenius norm summed over every incidence.
    pub fn norm_squared(&self) -> f64 {
        self.iter().map(|m| m.norm_squared()).sum()
    }

    pub fn max_frobenius(&self) -> f64 {
        self.iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn is_all_zero(&self) -> bool {
        self.iter().all(|m| m.iter().all(|&x| x == 0.0))
    }

    pub fn max_abs_diff(&self, other: &RestrictionMaps) -> f64 {
        self.iter()
            .zip(other.iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Checks incidence counts, shapes and finiteness against the sheaf.
    pub fn check(&self, sheaf: &SheafGraph) -> Result<()> {
        let g = sheaf.graph();
        if self.per_vertex.len() != g.n_vertices() {
            return Err(Error::shape(
                "restriction map vertices",
                g.n_vertices(),
                self.per_vertex.len(),
            ));
        }
        for (i, maps) in self.per_vertex.iter().enumerate() {
            if maps.len() != g.degree(i) {
                return Err(Error::shape(
                    format!("maps at vertex {i}"),
                    g.degree(i),
                    maps.len(),
                ));
            }
            for (inc, m) in g.adjacency(i).iter().zip(maps) {
                let ctx = || format!("P[{i},{}]", inc.neighbor);
                if m.nrows() != sheaf.edge_dim(inc.edge) {
                    return Err(Error::shape(
                        format!("{} rows", ctx()),
                        sheaf.edge_dim(inc.edge),
                        m.nrows(),
                    ));
                }
                if m.ncols() != sheaf.stalk_dim(i) {
                    return Err(Error::shape(
                        format!("{} cols", ctx()),
                        sheaf.stalk_dim(i),
                        m.ncols(),
                    ));
                }
                if !m.iter().all(|x| x.is_finite()) {
                    return Err(Error::param(ctx(), "non-finite entry"));
                }
            }
        }
        Ok(())
    }
}
