//! Training: the joint objective, alternating updates, baselines, special
//! cases and step-size bounds.

mod bounds;
mod config;
mod init;
mod matrix_form;
mod metrics;
mod objective;
mod special;
mod steps;
mod trainer;

pub use bounds::{step_bounds, StepBounds};
pub use config::{Algorithm, InitKind, InitSpec, TrainerConfig};
pub use init::init_maps;
pub use matrix_form::{dense_state, dense_to_parts, matrix_form_step, DenseState};
pub use metrics::{evaluate, percentile, MetricSummary};
pub use objective::{check_federation, grad_p_psi, grad_theta_psi, local_loss_sum, objective_psi};
pub use special::{selection_matrix, special_case_sheaf, FixedSheaf, SpecialCase};
pub use steps::{client_projections, consensus_step, p_step, theta_step, ThetaUpdate};
pub use trainer::{
    auto_step_sizes, laplacian_norm_estimate, metropolis_weights, run_training, DescentCheck,
    Event, HalfStep, Hindsight, RateCheck, RoundRecord, Trainer, TrainingRun, DESCENT_SLACK,
};
