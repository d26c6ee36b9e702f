//! The joint objective `Ψ(θ, P) = Σ f_i(θ_i) + (λ/2) Σ_e ‖P_ij θ_i − P_ji θ_j‖²`
//! and its partial gradients.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::netsim::Inbox;
use crate::sheaf::{self, RestrictionMaps, Section, SheafGraph};
use crate::tasks::Federation;

/// Checks that client model sizes match the stalk dimensions.
pub fn check_federation(sheaf: &SheafGraph, fed: &Federation) -> Result<()> {
    if fed.n_clients() != sheaf.n_vertices() {
        return Err(Error::shape("clients", sheaf.n_vertices(), fed.n_clients()));
    }
    for (i, c) in fed.clients.iter().enumerate() {
        if c.model_dim() != sheaf.stalk_dim(i) {
            return Err(Error::shape(
                format!("model size of client {i}"),
                sheaf.stalk_dim(i),
                c.model_dim(),
            ));
        }
    }
    Ok(())
}

fn check_all(
    sheaf: &SheafGraph,
    fed: &Federation,
    theta: &Section,
    maps: &RestrictionMaps,
) -> Result<()> {
    check_federation(sheaf, fed)?;
    theta.check(sheaf)?;
    maps.check(sheaf)
}

/// `Σ f_i(θ_i)`, summed in client order.
pub fn local_loss_sum(fed: &Federation, theta: &Section, exec: Execution) -> Result<f64> {
    let losses =
        exec::try_map_indexed(exec, fed.n_clients(), |i| fed.clients[i].loss(&theta.0[i]))?;
    Ok(losses.iter().sum())
}

pub fn objective_psi(
    sheaf: &SheafGraph,
    fed: &Federation,
    theta: &Section,
    maps: &RestrictionMaps,
    lambda: f64,
) -> Result<f64> {
    check_all(sheaf, fed, theta, maps)?;
    let f = local_loss_sum(fed, theta, Execution::Sequential)?;
    let q = sheaf::quadratic_form(sheaf, maps, theta)?;
    Ok(f + 0.5 * lambda * q)
}

/// `∇_θ Ψ = ∇f(θ) + λ L_F θ`, assembled per client exactly as the local
/// update computes it.
pub fn grad_theta_psi(
    sheaf: &SheafGraph,
    fed: &Federation,
    theta: &Section,
    maps: &RestrictionMaps,
    lambda: f64,
) -> Result<Section> {
    check_all(sheaf, fed, theta, maps)?;
    let proj = sheaf::projections(sheaf, maps, theta);
    let lap = sheaf::laplacian_from_projections(sheaf, maps, &proj);
    let blocks = (0..sheaf.n_vertices())
        .map(|i| {
            let mut g = fed.clients[i].grad(&theta.0[i])?;
            g.axpy(lambda, &lap.0[i], 1.0);
            Ok(g)
        })
        .collect::<Result<Vec<DVector<f64>>>>()?;
    Ok(Section(blocks))
}

/// `∂Ψ/∂P_ij = λ (P_ij θ_i − P_ji θ_j) θ_iᵀ` for every incidence.
pub fn grad_p_psi(
    sheaf: &SheafGraph,
    theta: &Section,
    maps: &RestrictionMaps,
    lambda: f64,
) -> Result<RestrictionMaps> {
    theta.check(sheaf)?;
    maps.check(sheaf)?;
    let g = sheaf.graph();
    let proj = sheaf::projections(sheaf, maps, theta);
    let per_vertex = (0..g.n_vertices())
        .map(|i| {
            (0..g.degree(i))
                .map(|slot| {
                    let j = g.adjacency(i)[slot].neighbor;
                    let r = &proj[i][slot] - &proj[j][g.mirror_slot(i, slot)];
                    (r * theta.0[i].transpose()) * lambda
                })
                .collect()
        })
        .collect();
    Ok(RestrictionMaps { per_vertex })
}

/// `‖∂Ψ/∂P‖²` from precomputed projections and their mirrored counterparts:
/// `Σ λ² ‖r_ij‖² ‖θ_i‖²`.
pub(crate) fn grad_p_norm_sq(
    sheaf: &SheafGraph,
    theta: &Section,
    own: &[Vec<DVector<f64>>],
    inbox: &Inbox,
    lambda: f64,
) -> Result<f64> {
    let g = sheaf.graph();
    let mut total = 0.0;
    for (i, projections) in own.iter().enumerate().take(g.n_vertices()) {
        let t = theta.0[i].norm_squared();
        for (slot, p) in projections.iter().enumerate() {
            total += (p - inbox.get(g, i, slot)?).norm_squared() * t;
        }
    }
    Ok(lambda * lambda * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf::{build_sheaf, EdgeDims, Graph};
    use crate::tasks::{ClientData, LossKind, Targets};
    use nalgebra::DMatrix;

    fn half_square_pair() -> (SheafGraph, Federation) {
        // f_i(θ) = ½θ² from a single sample x = 1, y = 0 and n = 1.
        let s = build_sheaf(
            Graph::new(2, [(0, 1)]).unwrap(),
            vec![1, 1],
            EdgeDims::Gamma(1.0),
        )
        .unwrap();
        let c = ClientData::new(
            DMatrix::from_element(1, 1, 1.0),
            Targets::Real(vec![0.0]),
            LossKind::LinearRegression,
            0.0,
        )
        .unwrap();
        (s, Federation::new(vec![c.clone(), c]).unwrap())
    }

    #[test]
    fn hand_evaluated_objective() {
        let (s, fed) = half_square_pair();
        let maps = RestrictionMaps::from_fn(&s, |_, _, _, _| DMatrix::from_element(1, 1, 1.0));
        let theta = Section(vec![
            DVector::from_element(1, 1.0),
            DVector::from_element(1, 0.0),
        ]);
        // ½ + 0 + (1/2)·1
        assert!((objective_psi(&s, &fed, &theta, &maps, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((objective_psi(&s, &fed, &theta, &maps, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let g = grad_theta_psi(&s, &fed, &theta, &maps, 1.0).unwrap();
        assert_eq!((g.0[0][0], g.0[1][0]), (2.0, -1.0));
        let gp = grad_p_psi(&s, &theta, &maps, 1.0).unwrap();
        assert_eq!(gp.get(0, 0)[(0, 0)], 1.0);
        assert_eq!(gp.get(1, 0)[(0, 0)], 0.0);
    }

    #[test]
    fn zero_lambda_gives_local_gradients() {
        let (s, fed) = half_square_pair();
        let maps = RestrictionMaps::from_fn(&s, |_, _, _, _| DMatrix::from_element(1, 1, 3.0));
        let theta = Section(vec![
            DVector::from_element(1, 0.7),
            DVector::from_element(1, -0.2),
        ]);
        let g = grad_theta_psi(&s, &fed, &theta, &maps, 0.0).unwrap();
        assert_eq!(g.0[0][0], 0.7);
        assert!(grad_p_psi(&s, &theta, &maps, 0.0).unwrap().is_all_zero());
    }

    #[test]
    fn mismatched_federation() {
        let (s, _) = half_square_pair();
        let c = ClientData::new(
            DMatrix::from_element(1, 2, 1.0),
            Targets::Real(vec![0.0]),
            LossKind::LinearRegression,
            0.0,
        )
        .unwrap();
        let fed = Federation::new(vec![c.clone(), c]).unwrap();
        assert!(matches!(
            check_federation(&s, &fed),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
