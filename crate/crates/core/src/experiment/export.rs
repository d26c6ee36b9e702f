//! Restriction-map norm grids and CSV helpers.

use nalgebra::DMatrix;

use crate::sheaf::{RestrictionMaps, SheafGraph};

/// `N×N` grid with entry `(i, j) = ‖P_ij‖_F` on edges and 0 elsewhere.
pub fn export_heatmap(sheaf: &SheafGraph, maps: &RestrictionMaps) -> DMatrix<f64> {
    let n = sheaf.n_vertices();
    let g = sheaf.graph();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for (slot, inc) in g.adjacency(i).iter().enumerate() {
            m[(i, inc.neighbor)] = maps.per_vertex[i][slot].norm();
        }
    }
    m
}

/// Plain comma-separated grid, one row per line, no header.
pub fn grid_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = m.row(r).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Mean `‖P_ij‖_F` over incidences whose endpoints share a group, and over
/// those that do not. `None` for a side with no incidences.
pub fn group_norm_means(
    sheaf: &SheafGraph,
    maps: &RestrictionMaps,
    groups: &[usize],
) -> (Option<f64>, Option<f64>) {
    let g = sheaf.graph();
    let (mut within, mut cross) = (Vec::new(), Vec::new());
    for i in 0..g.n_vertices() {
        for (slot, inc) in g.adjacency(i).iter().enumerate() {
            let v = maps.per_vertex[i][slot].norm();
            if groups[i] == groups[inc.neighbor] {
                within.push(v);
            } else {
                cross.push(v);
            }
        }
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    (mean(&within), mean(&cross))
}

/// Filesystem-safe version of a run label.
pub fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}
