//! Cellular sheaves over graphs: stalk and edge dimensions, restriction maps,
//! the coboundary and the sheaf Laplacian.

mod cochains;
pub mod dense;
mod graph;
pub mod io;
mod ops;

pub use cochains::{EdgeVector, RestrictionMaps, Section};
pub use graph::{build_sheaf, gamma_edge_dim, EdgeDims, Graph, Incidence, SheafGraph};
pub(crate) use ops::laplacian_from_projections;
pub use ops::{coboundary, is_global_section, laplacian_apply, projections, quadratic_form};
