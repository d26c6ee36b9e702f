//! The per-client updates of one round.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::exec::{self, Execution};
use crate::netsim::Inbox;
use crate::sheaf::{RestrictionMaps, Section, SheafGraph};
use crate::tasks::Federation;

/// `P_ij θ_i` for every incidence, computed client by client. These are
/// the payloads each client sends.
pub fn client_projections(
    sheaf: &SheafGraph,
    maps: &RestrictionMaps,
    theta: &Section,
    exec: Execution,
) -> Vec<Vec<DVector<f64>>> {
    exec::map_indexed(exec, sheaf.n_vertices(), |i| {
        maps.per_vertex[i].iter().map(|p| p * &theta.0[i]).collect()
    })
}

/// Result of the model half-step.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaUpdate {
    pub theta: Section,
    /// The direction used, `∇f_i + λ Σ_j P_ijᵀ(P_ij θ_i − P_ji θ_j)`.
    pub grad: Section,
    /// Local losses at the pre-update point (on the batch, if any).
    pub losses: Vec<f64>,
}

/// One gradient step per client on its local data and the neighbor
/// projections in `inbox`.
#[allow(clippy::too_many_arguments)]
pub fn theta_step(
    sheaf: &SheafGraph,
    fed: &Federation,
    theta: &Section,
    maps: &RestrictionMaps,
    inbox: &Inbox,
    lambda: f64,
    alpha: f64,
    batches: Option<&[Vec<usize>]>,
    exec: Execution,
) -> Result<ThetaUpdate> {
    let g = sheaf.graph();
    let out = exec::try_map_indexed(exec, sheaf.n_vertices(), |i| {
        let theta_i = &theta.0[i];
        let batch = batches.map(|b| b[i].as_slice());
        let (loss, mut grad) = fed.clients[i].loss_and_grad(theta_i, batch)?;
        let mut acc = DVector::zeros(sheaf.stalk_dim(i));
        for slot in 0..g.degree(i) {
            let p = &maps.per_vertex[i][slot];
            let diff = p * theta_i - inbox.get(g, i, slot)?;
            acc += p.tr_mul(&diff);
        }
        grad.axpy(lambda, &acc, 1.0);
        let mut next = theta_i.clone();
        next.axpy(-alpha, &grad, 1.0);
        Ok::<_, crate::Error>((next, grad, loss))
    })?;
    let mut update = ThetaUpdate {
        theta: Section(Vec::with_capacity(out.len())),
        grad: Section(Vec::with_capacity(out.len())),
        losses: Vec::with_capacity(out.len()),
    };
    for (t, gr, l) in out {
        update.theta.0.push(t);
        update.grad.0.push(gr);
        update.losses.push(l);
    }
    Ok(update)
}

/// The model step with identity maps scaled by `√a_ij`: the coupling term
/// reduces to `Σ_j a_ij (θ_i − θ_j)` and `inbox` holds full neighbor models.
/// `weights[i][slot]` is `a_ij`.
#[allow(clippy::too_many_arguments)]
pub fn consensus_step(
    sheaf: &SheafGraph,
    fed: &Federation,
    theta: &Section,
    weights: &[Vec<f64>],
    inbox: &Inbox,
    lambda: f64,
    alpha: f64,
    batches: Option<&[Vec<usize>]>,
    exec: Execution,
) -> Result<ThetaUpdate> {
    let g = sheaf.graph();
    let out = exec::try_map_indexed(exec, sheaf.n_vertices(), |i| {
        let theta_i = &theta.0[i];
        let batch = batches.map(|b| b[i].as_slice());
        let (loss, mut grad) = fed.clients[i].loss_and_grad(theta_i, batch)?;
        let mut acc = DVector::zeros(sheaf.stalk_dim(i));
        for (slot, a) in weights[i].iter().enumerate() {
            acc += (theta_i - inbox.get(g, i, slot)?) * *a;
        }
        grad.axpy(lambda, &acc, 1.0);
        let mut next = theta_i.clone();
        next.axpy(-alpha, &grad, 1.0);
        Ok::<_, crate::Error>((next, grad, loss))
    })?;
    let mut update = ThetaUpdate {
        theta: Section(Vec::with_capacity(out.len())),
        grad: Section(Vec::with_capacity(out.len())),
        losses: Vec::with_capacity(out.len()),
    };
    for (t, gr, l) in out {
        update.theta.0.push(t);
        update.grad.0.push(gr);
        update.losses.push(l);
    }
    Ok(update)
}

/// Rank-one map update `P_ij ← P_ij − ηλ (P_ij θ_i − P_ji θ_j) θ_iᵀ` at the
/// new models, with both maps taken from the current round.
pub fn p_step(
    sheaf: &SheafGraph,
    theta: &Section,
    maps: &RestrictionMaps,
    inbox: &Inbox,
    lambda: f64,
    eta: f64,
    exec: Execution,
) -> Result<RestrictionMaps> {
    let g = sheaf.graph();
    let per_vertex = exec::try_map_indexed(exec, sheaf.n_vertices(), |i| {
        let theta_i = &theta.0[i];
        (0..g.degree(i))
            .map(|slot| {
                let p = &maps.per_vertex[i][slot];
                let r = p * theta_i - inbox.get(g, i, slot)?;
                let mut next: DMatrix<f64> = p.clone();
                next.ger(-eta * lambda, &r, theta_i, 1.0);
                Ok(next)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(RestrictionMaps { per_vertex })
}
