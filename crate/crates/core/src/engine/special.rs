//! Classical federated setups expressed as fixed sheaves.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sheaf::{build_sheaf, EdgeDims, Graph, RestrictionMaps, SheafGraph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpecialCase {
    /// `P_ij = √a_ij I` with one weight per edge in canonical edge order;
    /// all weights 1 when `weights` is unset.
    ConventionalFmtl {
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    /// Identity maps on the given graph.
    ConventionalFl,
    /// Star around an added server vertex 0 with identity maps.
    PersonalizedFl,
    /// Star around an added server vertex 0. Client `i` keeps the server
    /// coordinates listed in `selections[i]`, so `P_0i = Π_i` selects them
    /// and `P_i0 = I`.
    HybridFl {
        server_dim: usize,
        selections: Vec<Vec<usize>>,
    },
}

/// A sheaf whose maps stay fixed during training.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSheaf {
    pub sheaf: SheafGraph,
    pub maps: RestrictionMaps,
    /// The added server vertex for the star constructions; its local loss is
    /// identically zero.
    pub server: Option<usize>,
}

fn equal_dim(dims: &[usize]) -> Result<usize> {
    match dims.split_first() {
        Some((&d, rest)) if rest.iter().all(|&x| x == d) => Ok(d),
        Some(_) => Err(Error::param(
            "stalk_dims",
            "this construction needs equal model dimensions",
        )),
        None => Err(Error::param("stalk_dims", "no clients")),
    }
}

fn star(n_clients: usize) -> Result<Graph> {
    Graph::new(n_clients + 1, (1..=n_clients).map(|i| (0, i)))
}

/// Builds the sheaf for `case`. `graph` is the client graph (ignored by the
/// star constructions except for its size) and `dims` the client model sizes.
pub fn special_case_sheaf(case: &SpecialCase, graph: &Graph, dims: &[usize]) -> Result<FixedSheaf> {
    if dims.len() != graph.n_vertices() {
        return Err(Error::shape(
            "client dimensions",
            graph.n_vertices(),
            dims.len(),
        ));
    }
    let n = graph.n_vertices();
    match case {
        SpecialCase::ConventionalFmtl { weights } => {
            let d = equal_dim(dims)?;
            let weights = match weights {
                Some(w) if w.len() != graph.n_edges() => {
                    return Err(Error::shape("edge weights", graph.n_edges(), w.len()))
                }
                Some(w) => w.clone(),
                None => vec![1.0; graph.n_edges()],
            };
            if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
                return Err(Error::param(
                    "weights",
                    format!("edge weight {w} must be positive"),
                ));
            }
            let sheaf = build_sheaf(
                graph.clone(),
                dims.to_vec(),
                EdgeDims::Explicit(vec![d; graph.n_edges()]),
            )?;
            let g = sheaf.graph().clone();
            let maps = RestrictionMaps::from_fn(&sheaf, |i, j, _, _| {
                let e = g.adjacency(i)[g.slot_of(i, j).unwrap()].edge;
                DMatrix::identity(d, d) * weights[e].sqrt()
            });
            Ok(FixedSheaf {
                sheaf,
                maps,
                server: None,
            })
        }
        SpecialCase::ConventionalFl => {
            let d = equal_dim(dims)?;
            let sheaf = build_sheaf(
                graph.clone(),
                dims.to_vec(),
                EdgeDims::Explicit(vec![d; graph.n_edges()]),
            )?;
            let maps = RestrictionMaps::from_fn(&sheaf, |_, _, r, c| DMatrix::identity(r, c));
            Ok(FixedSheaf {
                sheaf,
                maps,
                server: None,
            })
        }
        SpecialCase::PersonalizedFl => {
            let d = equal_dim(dims)?;
            let sheaf = build_sheaf(star(n)?, vec![d; n + 1], EdgeDims::Explicit(vec![d; n]))?;
            let maps = RestrictionMaps::from_fn(&sheaf, |_, _, r, c| DMatrix::identity(r, c));
            Ok(FixedSheaf {
                sheaf,
                maps,
                server: Some(0),
            })
        }
        SpecialCase::HybridFl {
            server_dim,
            selections,
        } => {
            if selections.len() != n {
                return Err(Error::shape("selections", n, selections.len()));
            }
            for (i, sel) in selections.iter().enumerate() {
                if sel.len() != dims[i] {
                    return Err(Error::shape(
                        format!("selection rows of client {i}"),
                        dims[i],
                        sel.len(),
                    ));
                }
                if let Some(&k) = sel.iter().find(|&&k| k >= *server_dim) {
                    return Err(Error::param(
                        "selections",
                        format!(
                            "client {i} selects coordinate {k} of a {server_dim}-dim server model"
                        ),
                    ));
                }
            }
            let mut stalks = vec![*server_dim];
            stalks.extend_from_slice(dims);
            let sheaf = build_sheaf(star(n)?, stalks, EdgeDims::Explicit(dims.to_vec()))?;
            let maps = RestrictionMaps::from_fn(&sheaf, |i, j, r, c| {
                if i == 0 {
                    selection_matrix(&selections[j - 1], c)
                } else {
                    DMatrix::identity(r, c)
                }
            });
            Ok(FixedSheaf {
                sheaf,
                maps,
                server: Some(0),
            })
        }
    }
}

/// The binary matrix with a single one per row at the listed columns.
pub fn selection_matrix(selection: &[usize], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(selection.len(), cols, |r, c| {
        if selection[r] == c {
            1.0
        } else {
            0.0
        }
    })
}
