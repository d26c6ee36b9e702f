//! Dense assembly of the coboundary and Laplacian matrices.
//!
//! Used for cross-checks, inspection and small instances only; training uses
//! the matrix-free operators in [`super::ops`].

use nalgebra::DMatrix;

use super::cochains::RestrictionMaps;
use super::graph::SheafGraph;
use crate::error::{Error, Result};

/// Largest `max(Σ d_i, Σ d_e)` accepted by the dense routines.
pub const DENSE_LIMIT: usize = 4096;

fn guard(sheaf: &SheafGraph) -> Result<()> {
    let dim = sheaf.total_stalk_dim().max(sheaf.total_edge_dim());
    if dim > DENSE_LIMIT {
        return Err(Error::TooLargeForDense {
            dim,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

/// Signed block matrix of `δ`: block `(e, e⁺) = P_{e⁺}`, block `(e, e⁻) = −P_{e⁻}`.
pub fn coboundary_matrix(sheaf: &SheafGraph, maps: &RestrictionMaps) -> Result<DMatrix<f64>> {
    guard(sheaf)?;
    maps.check(sheaf)?;
    let mut out = DMatrix::zeros(sheaf.total_edge_dim(), sheaf.total_stalk_dim());
    for (e, (&(lo, hi), row)) in sheaf
        .graph()
        .edges()
        .iter()
        .zip(sheaf.edge_offsets())
        .enumerate()
    {
        let (p_lo, p_hi) = maps.edge_pair(sheaf, e);
        out.view_mut((row, sheaf.offset(hi)), p_hi.shape())
            .copy_from(p_hi);
        out.view_mut((row, sheaf.offset(lo)), p_lo.shape())
            .copy_from(&(-p_lo));
    }
    Ok(out)
}

/// Sheaf Laplacian assembled block by block: diagonal `Σ_j P_ijᵀ P_ij`,
/// off-diagonal `(j, i)` block `−P_jiᵀ P_ij` on edges.
pub fn laplacian_matrix(sheaf: &SheafGraph, maps: &RestrictionMaps) -> Result<DMatrix<f64>> {
    guard(sheaf)?;
    maps.check(sheaf)?;
    let d = sheaf.total_stalk_dim();
    let mut out = DMatrix::zeros(d, d);
    let g = sheaf.graph();
    for i in 0..g.n_vertices() {
        let oi = sheaf.offset(i);
        let di = sheaf.stalk_dim(i);
        for (slot, inc) in g.adjacency(i).iter().enumerate() {
            let p_ij = maps.get(i, slot);
            let p_ji = maps.get(inc.neighbor, g.mirror_slot(i, slot));
            let mut diag = out.view_mut((oi, oi), (di, di));
            diag += p_ij.tr_mul(p_ij);
            let j = inc.neighbor;
            out.view_mut((sheaf.offset(j), oi), (sheaf.stalk_dim(j), di))
                .copy_from(&(-p_ji.tr_mul(p_ij)));
        }
    }
    Ok(out)
}

/// Orthonormal basis (as columns) of the null space of a symmetric PSD
/// matrix, via SVD with singular-value threshold `1e-10 · σ_max`.
pub fn null_space(matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let n = matrix.ncols();
    let svd = matrix.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thresh = 1e-10 * sigma_max;
    // Rows of Vᵀ beyond the returned singular values are absent for wide
    // matrices; the Laplacian is square so every right singular vector is present.
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= thresh)
        .map(|(k, _)| v_t.row(k).transpose())
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Dimension of `H⁰ = ker L_F`.
pub fn global_section_dim(sheaf: &SheafGraph, maps: &RestrictionMaps) -> Result<usize> {
    Ok(null_space(&laplacian_matrix(sheaf, maps)?).ncols())
}
