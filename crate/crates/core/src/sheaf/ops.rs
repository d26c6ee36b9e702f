//! Matrix-free coboundary and sheaf Laplacian.

use nalgebra::DVector;

use super::cochains::{EdgeVector, RestrictionMaps, Section};
use super::graph::SheafGraph;
use crate::error::Result;

/// Projections `P_ij θ_i` for every incidence, in the per-vertex slot layout.
pub fn projections(
    sheaf: &SheafGraph,
    maps: &RestrictionMaps,
    theta: &Section,
) -> Vec<Vec<DVector<f64>>> {
    (0..sheaf.n_vertices())
        .map(|i| maps.per_vertex[i].iter().map(|p| p * &theta.0[i]).collect())
        .collect()
}

fn check(sheaf: &SheafGraph, maps: &RestrictionMaps, theta: &Section) -> Result<()> {
    maps.check(sheaf)?;
    theta.check(sheaf)
}

/// `δ(θ)_e = P_{e⁺} θ_{e⁺} − P_{e⁻} θ_{e⁻}` under the canonical orientation.
pub fn coboundary(
    sheaf: &SheafGraph,
    maps: &RestrictionMaps,
    theta: &Section,
) -> Result<EdgeVector> {
    check(sheaf, maps, theta)?;
    let blocks = sheaf
        .graph()
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(lo, hi))| {
            let (p_lo, p_hi) = maps.edge_pair(sheaf, e);
            p_hi * &theta.0[hi] - p_lo * &theta.0[lo]
        })
        .collect();
    Ok(EdgeVector(blocks))
}

/// `L_F θ`, computed per vertex as `Σ_j P_ijᵀ (P_ij θ_i − P_ji θ_j)`.
///
/// Each output block only touches the vertex's own maps and the neighbors'
/// projections, mirroring what a client can compute locally.
pub fn laplacian_apply(
    sheaf: &SheafGraph,
    maps: &RestrictionMaps,
    theta: &Section,
) -> Result<Section> {
    check(sheaf, maps, theta)?;
    let proj = projections(sheaf, maps, theta);
    Ok(laplacian_from_projections(sheaf, maps, &proj))
}

pub(crate) fn laplacian_from_projections(
    sheaf: &SheafGraph,
    maps: &RestrictionMaps,
    proj: &[Vec<DVector<f64>>],
) -> Section {
    let g = sheaf.graph();
    Section(
        (0..g.n_vertices())
            .map(|i| {
                let mut acc = DVector::zeros(sheaf.stalk_dim(i));
                for (slot, inc) in g.adjacency(i).iter().enumerate() {
                    let diff = &proj[i][slot] - &proj[inc.neighbor][g.mirror_slot(i, slot)];
                    acc += maps.per_vertex[i][slot].tr_mul(&diff);
                }
                acc
            })
            .collect(),
    )
}

/// `Q_F(θ) = Σ_e ‖P_ij θ_i − P_ji θ_j‖²`.
pub fn quadratic_form(sheaf: &SheafGraph, maps: &RestrictionMaps, theta: &Section) -> Result<f64> {
    Ok(coboundary(sheaf, maps, theta)?.norm_squared())
}

/// Whether every edge discrepancy has norm at most `tol`.
pub fn is_global_section(
    sheaf: &SheafGraph,
    maps: &RestrictionMaps,
    theta: &Section,
    tol: f64,
) -> Result<bool> {
    let d = coboundary(sheaf, maps, theta)?;
    Ok(d.0.iter().all(|b| b.norm() <= tol))
}
