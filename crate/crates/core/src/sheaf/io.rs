//! JSON document form of a sheaf and its restriction maps.
//!
//! Maps are listed per edge in canonical edge order, each flattened row-major:
//! `tail` is `P_{e⁻ e⁺}` (`d_e × d_{e⁻}`), `head` is `P_{e⁺ e⁻}` (`d_e × d_{e⁺}`).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cochains::RestrictionMaps;
use super::graph::{build_sheaf, EdgeDims, Graph, SheafGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheafDocument {
    pub n_vertices: usize,
    pub stalk_dims: Vec<usize>,
    pub edges: Vec<[usize; 2]>,
    pub edge_dims: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maps: Option<Vec<EdgeMaps>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeMaps {
    pub tail: Vec<f64>,
    pub head: Vec<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl SheafDocument {
    pub fn from_sheaf(sheaf: &SheafGraph, maps: Option<&RestrictionMaps>) -> Self {
        SheafDocument {
            n_vertices: sheaf.n_vertices(),
            stalk_dims: sheaf.stalk_dims().to_vec(),
            edges: sheaf.graph().edges().iter().map(|&(a, b)| [a, b]).collect(),
            edge_dims: sheaf.edge_dims().to_vec(),
            maps: maps.map(|m| {
                (0..sheaf.n_edges())
                    .map(|e| {
                        let (t, h) = m.edge_pair(sheaf, e);
                        EdgeMaps {
                            tail: row_major(t),
                            head: row_major(h),
                        }
                    })
                    .collect()
            }),
        }
    }

    /// Rebuilds the sheaf (and maps, when present). Edges may be listed in
    /// any order or orientation; they are canonicalized.
    pub fn to_sheaf(&self) -> Result<(SheafGraph, Option<RestrictionMaps>)> {
        if self.edges.len() != self.edge_dims.len() {
            return Err(Error::shape(
                "edge_dims",
                self.edges.len(),
                self.edge_dims.len(),
            ));
        }
        let graph = Graph::new(self.n_vertices, self.edges.iter().map(|e| (e[0], e[1])))?;
        // Re-key the per-edge data by canonical edge index.
        let mut order = vec![0usize; self.edges.len()];
        let mut flipped = vec![false; self.edges.len()];
        for (k, e) in self.edges.iter().enumerate() {
            let canon = (e[0].min(e[1]), e[0].max(e[1]));
            let idx = graph.edges().binary_search(&canon).expect("edge present");
            order[idx] = k;
            flipped[idx] = e[0] > e[1];
        }
        let dims = order.iter().map(|&k| self.edge_dims[k]).collect();
        let sheaf = build_sheaf(graph, self.stalk_dims.clone(), EdgeDims::Explicit(dims))?;
        let maps = match &self.maps {
            None => None,
            Some(list) => {
                if list.len() != self.edges.len() {
                    return Err(Error::shape("maps", self.edges.len(), list.len()));
                }
                let mut maps = RestrictionMaps::zeros(&sheaf);
                for e in 0..sheaf.n_edges() {
                    let (lo, hi) = sheaf.graph().edges()[e];
                    let [s_lo, s_hi] = sheaf.graph().edge_slots(e);
                    let entry = &list[order[e]];
                    // A listed edge (a, b) with a > b stores P_ab as its tail.
                    let (t, h) = if flipped[e] {
                        (&entry.head, &entry.tail)
                    } else {
                        (&entry.tail, &entry.head)
                    };
                    let d_e = sheaf.edge_dim(e);
                    for (v, slot, data) in [(lo, s_lo, t), (hi, s_hi, h)] {
                        let cols = sheaf.stalk_dim(v);
                        if data.len() != d_e * cols {
                            return Err(Error::shape(
                                format!("map entries P[{v}] on edge {e}"),
                                d_e * cols,
                                data.len(),
                            ));
                        }
                        maps.per_vertex[v][slot] = DMatrix::from_row_slice(d_e, cols, data);
                    }
                }
                maps.check(&sheaf)?;
                Some(maps)
            }
        };
        Ok((sheaf, maps))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
