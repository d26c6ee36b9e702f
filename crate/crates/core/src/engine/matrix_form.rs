//! Dense stacked form of one round, used as an independent oracle:
//! `θ ← θ − α(∇f + λ BᵀBθ)`, then `B ← H ⊙ (B − ηλ (Bθ)θᵀ)` with `B` the
//! signed coboundary matrix and `H` its block-incidence mask.

use nalgebra::{DMatrix, DVector};

use super::objective::check_federation;
use crate::error::{Error, Result};
use crate::sheaf::{dense, RestrictionMaps, Section, SheafGraph};
use crate::tasks::Federation;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub theta: DVector<f64>,
    pub coboundary: DMatrix<f64>,
    /// One on the `(e, e⁻)` and `(e, e⁺)` blocks, zero elsewhere.
    pub mask: DMatrix<f64>,
}

fn incidence_mask(sheaf: &SheafGraph) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(sheaf.total_edge_dim(), sheaf.total_stalk_dim());
    let offs = sheaf.edge_offsets();
    for (e, &(lo, hi)) in sheaf.graph().edges().iter().enumerate() {
        for v in [lo, hi] {
            h.view_mut(
                (offs[e], sheaf.offset(v)),
                (sheaf.edge_dim(e), sheaf.stalk_dim(v)),
            )
            .fill(1.0);
        }
    }
    h
}

pub fn dense_state(
    sheaf: &SheafGraph,
    theta: &Section,
    maps: &RestrictionMaps,
) -> Result<DenseState> {
    theta.check(sheaf)?;
    Ok(DenseState {
        theta: theta.to_flat(),
        coboundary: dense::coboundary_matrix(sheaf, maps)?,
        mask: incidence_mask(sheaf),
    })
}

/// Splits a dense state back into per-vertex models and per-incidence maps.
pub fn dense_to_parts(
    sheaf: &SheafGraph,
    state: &DenseState,
) -> Result<(Section, RestrictionMaps)> {
    let theta = Section::from_flat(sheaf, state.theta.as_slice())?;
    let g = sheaf.graph();
    let offs = sheaf.edge_offsets();
    let b = &state.coboundary;
    let maps = RestrictionMaps::from_fn(sheaf, |i, j, r, c| {
        let e = g.adjacency(i)[g.slot_of(i, j).expect("incident")].edge;
        let block = b.view((offs[e], sheaf.offset(i)), (r, c)).into_owned();
        // the tail of each edge carries a minus sign in B
        if i < j {
            -block
        } else {
            block
        }
    });
    Ok((theta, maps))
}

pub fn matrix_form_step(
    sheaf: &SheafGraph,
    fed: &Federation,
    state: &DenseState,
    lambda: f64,
    alpha: f64,
    eta: f64,
) -> Result<DenseState> {
    check_federation(sheaf, fed)?;
    let dim = sheaf.total_stalk_dim().max(sheaf.total_edge_dim());
    if dim > dense::DENSE_LIMIT {
        return Err(Error::TooLargeForDense {
            dim,
            limit: dense::DENSE_LIMIT,
        });
    }
    let theta = Section::from_flat(sheaf, state.theta.as_slice())?;
    let grad_f = Section(
        (0..sheaf.n_vertices())
            .map(|i| fed.clients[i].grad(&theta.0[i]))
            .collect::<Result<Vec<_>>>()?,
    )
    .to_flat();
    let b = &state.coboundary;
    let lap_theta = b.tr_mul(&(b * &state.theta));
    let next_theta = &state.theta - (grad_f + lap_theta * lambda) * alpha;
    let r = b * &next_theta;
    let step = (r * next_theta.transpose()) * (eta * lambda);
    let next_b = (b - step).component_mul(&state.mask);
    Ok(DenseState {
        theta: next_theta,
        coboundary: next_b,
        mask: state.mask.clone(),
    })
}
