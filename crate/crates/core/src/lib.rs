//! Decentralized federated multi-task learning with sheaf-Laplacian coupling.
//!
//! Clients hold local models of possibly different sizes and jointly learn
//! those models together with linear restriction maps that project each
//! model into a per-edge interaction space. Neighbors exchange only the
//! projected vectors.
//!
//! Module map:
//! - [`sheaf`]: graphs, stalk/edge dimensions, coboundary and Laplacian.
//! - [`tasks`]: per-client losses, synthetic and CSV federations, splits.
//! - [`engine`]: the joint objective, alternating updates, baselines,
//!   special cases and step-size bounds.
//! - [`netsim`]: topologies, message exchange and communication accounting.
//! - [`experiment`]: config-driven runs, metrics and exports.

pub mod engine;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod netsim;
pub mod rng;
pub mod sheaf;
pub mod tasks;

pub use error::{Error, Result};
pub use exec::Execution;
