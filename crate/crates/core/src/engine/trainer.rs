//! The round loop for every algorithm.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{step_bounds, StepBounds};
use super::config::{Algorithm, TrainerConfig};
use super::init::init_maps;
use super::metrics::{evaluate, MetricSummary};
use super::objective::{check_federation, grad_p_norm_sq, local_loss_sum};
use super::steps::{client_projections, consensus_step, p_step, theta_step};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::netsim::{exchange, BitsConvention, CommLedger};
use crate::rng;
use crate::sheaf::{
    build_sheaf, laplacian_apply, quadratic_form, EdgeDims, Graph, RestrictionMaps, Section,
    SheafGraph,
};
use crate::tasks::Federation;

/// Absolute slack allowed in the per-half-step descent inequalities.
pub const DESCENT_SLACK: f64 = 1e-9;

const PILOT_ROUNDS: usize = 50;
const LAPLACIAN_POWER_ITERS: usize = 100;

/// State after a given number of completed rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Completed rounds; 0 is the initial state.
    pub round: usize,
    pub psi: f64,
    /// Mean full-batch training loss over clients.
    pub train_loss: f64,
    pub bits_first_exchange: u64,
    pub bits_exact: u64,
    pub test: Option<MetricSummary>,
    pub max_theta_norm: f64,
    pub max_map_norm: f64,
}

impl RoundRecord {
    pub fn bits(&self, conv: BitsConvention) -> u64 {
        match conv {
            BitsConvention::FirstExchange => self.bits_first_exchange,
            BitsConvention::Exact => self.bits_exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HalfStep {
    Theta,
    Maps,
}

/// Quantities behind the two descent inequalities of round `round`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentCheck {
    pub round: usize,
    /// `Ψ(θᵏ, Pᵏ)`.
    pub psi_before: f64,
    /// `Ψ(θᵏ⁺¹, Pᵏ)`.
    pub psi_mid: f64,
    /// `Ψ(θᵏ⁺¹, Pᵏ⁺¹)`.
    pub psi_after: f64,
    /// `‖∇_θΨ(θᵏ, Pᵏ)‖²`.
    pub grad_theta_sq: f64,
    /// `‖∇_PΨ(θᵏ, Pᵏ)‖²`.
    pub grad_p_sq: f64,
    /// `‖∇_PΨ(θᵏ⁺¹, Pᵏ)‖²`, the direction of the map step.
    pub grad_p_mid_sq: f64,
    /// Running maximum of `‖θ‖` up to `θᵏ⁺¹`.
    pub d_theta_hat: f64,
    pub theta_ok: bool,
    pub maps_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    /// A descent inequality failed by `excess` beyond the slack.
    DescentViolation {
        round: usize,
        half: HalfStep,
        excess: f64,
    },
    /// `‖θ‖` exceeded the configured domain bound.
    DomainExceeded { round: usize, norm: f64, bound: f64 },
}

/// Whether the step sizes satisfied the convergence conditions given the
/// smoothness constant and the largest `‖θ‖` actually observed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hindsight {
    pub smoothness: f64,
    pub d_theta_hat: f64,
    pub alpha: f64,
    pub eta: f64,
    pub alpha_max: f64,
    pub eta_max: f64,
    pub alpha_ok: bool,
    pub eta_ok: bool,
    pub rho: f64,
    pub descent_violations: usize,
}

/// `min_k ‖∇Ψ(θᵏ, Pᵏ)‖² ≤ (Ψ⁰ − Ψ_best) / (ρ K)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub min_grad_sq: f64,
    pub psi0: f64,
    pub psi_best: f64,
    pub rho: f64,
    pub rounds: usize,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub algorithm: Algorithm,
    /// The sheaf the updates ran on (the constant sheaf for `dfedu`).
    pub sheaf: SheafGraph,
    pub theta: Section,
    /// Final maps for the coupled algorithms.
    pub maps: Option<RestrictionMaps>,
    pub lambda: f64,
    pub alpha: f64,
    pub eta: f64,
    pub smoothness: f64,
    pub history: Vec<RoundRecord>,
    pub checks: Vec<DescentCheck>,
    pub events: Vec<Event>,
    pub ledger: CommLedger,
    /// `(θᵏ, Pᵏ)` for `k = 0..=K` when requested.
    pub trajectory: Vec<(Section, Option<RestrictionMaps>)>,
    pub d_theta_hat: f64,
}

impl TrainingRun {
    pub fn psi_history(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.psi).collect()
    }

    pub fn final_record(&self) -> &RoundRecord {
        self.history
            .last()
            .expect("history holds the initial state")
    }

    pub fn step_bounds(&self) -> Result<StepBounds> {
        step_bounds(
            self.sheaf.n_vertices(),
            self.smoothness,
            self.lambda,
            self.d_theta_hat.max(f64::MIN_POSITIVE),
        )
    }

    pub fn hindsight(&self) -> Result<Hindsight> {
        let b = self.step_bounds()?;
        let coupled_maps = self.maps.is_some() && self.eta > 0.0 && self.lambda > 0.0;
        Ok(Hindsight {
            smoothness: self.smoothness,
            d_theta_hat: self.d_theta_hat,
            alpha: self.alpha,
            eta: self.eta,
            alpha_max: b.alpha_max,
            eta_max: b.eta_max,
            alpha_ok: self.alpha < b.alpha_max,
            eta_ok: !coupled_maps || self.eta < b.eta_max,
            rho: b.rho(self.alpha, self.eta),
            descent_violations: self
                .events
                .iter()
                .filter(|e| matches!(e, Event::DescentViolation { .. }))
                .count(),
        })
    }

    /// The averaged-gradient bound with `Ψ_best` in place of the optimum.
    /// Needs the monitored checks of a full-batch coupled run.
    pub fn rate_check(&self, rho: f64) -> Option<RateCheck> {
        if self.checks.is_empty() || rho <= 0.0 {
            return None;
        }
        let min_grad_sq = self
            .checks
            .iter()
            .map(|c| c.grad_theta_sq + c.grad_p_sq)
            .fold(f64::INFINITY, f64::min);
        let psi = self.psi_history();
        let psi_best = psi.iter().copied().fold(f64::INFINITY, f64::min);
        let rounds = self.checks.len();
        let bound = (psi[0] - psi_best) / (rho * rounds as f64);
        Some(RateCheck {
            min_grad_sq,
            psi0: psi[0],
            psi_best,
            rho,
            rounds,
            bound,
            holds: min_grad_sq <= bound,
        })
    }
}

/// Power-iteration estimate of the largest eigenvalue of the sheaf
/// Laplacian, inflated by 5% to stay on the safe side.
pub fn laplacian_norm_estimate(sheaf: &SheafGraph, maps: &RestrictionMaps) -> Result<f64> {
    let flat: Vec<f64> = (0..sheaf.total_stalk_dim())
        .map(|k| ((k + 1) as f64).sin() + 1.5)
        .collect();
    let mut v = Section::from_flat(sheaf, &flat)?;
    let mut est = 0.0;
    for _ in 0..LAPLACIAN_POWER_ITERS {
        let norm = v.norm();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v.0.iter_mut().for_each(|b| *b /= norm);
        let w = laplacian_apply(sheaf, maps, &v)?;
        est = v.dot(&w);
        v = w;
    }
    Ok(1.05 * est.max(0.0))
}

/// Data-driven step sizes: `α = 1/(L + λ‖L_F(P⁰)‖)` using the estimate above,
/// and `η = 1/(λ D²)` where `D` is twice the largest `‖θ‖` reached by a
/// short local gradient-descent pilot from `θ⁰`.
pub fn auto_step_sizes(
    fed: &Federation,
    sheaf: &SheafGraph,
    maps: Option<&RestrictionMaps>,
    theta0: &Section,
    lambda: f64,
    smoothness: f64,
) -> Result<(f64, f64)> {
    let lap = match maps {
        Some(m) if lambda > 0.0 => laplacian_norm_estimate(sheaf, m)?,
        _ => 0.0,
    };
    let alpha = 1.0 / (smoothness + lambda * lap);
    if lambda == 0.0 || maps.is_none() {
        return Ok((alpha, 0.0));
    }
    let mut theta = theta0.clone();
    let mut d = theta.norm();
    for _ in 0..PILOT_ROUNDS {
        for (i, t) in theta.0.iter_mut().enumerate() {
            let g = fed.clients[i].grad(t)?;
            t.axpy(-1.0 / smoothness, &g, 1.0);
        }
        d = d.max(theta.norm());
    }
    let d = (2.0 * d).max(1e-3);
    Ok((alpha, 1.0 / (lambda * d * d)))
}

/// Metropolis-Hastings gossip weights `w_ij = 1/(1 + max(deg_i, deg_j))`
/// per adjacency slot, and the remaining self weight.
pub fn metropolis_weights(graph: &Graph) -> Vec<(f64, Vec<f64>)> {
    (0..graph.n_vertices())
        .map(|i| {
            let w: Vec<f64> = graph
                .adjacency(i)
                .iter()
                .map(|inc| 1.0 / (1.0 + graph.degree(i).max(graph.degree(inc.neighbor)) as f64))
                .collect();
            (1.0 - w.iter().sum::<f64>(), w)
        })
        .collect()
}

pub struct Trainer<'a> {
    sheaf: &'a SheafGraph,
    train: &'a Federation,
    test: Option<&'a Federation>,
    config: TrainerConfig,
    theta0: Option<Section>,
    maps0: Option<RestrictionMaps>,
}

/// Shorthand for [`Trainer`] with default initial models.
pub fn run_training(
    sheaf: &SheafGraph,
    train: &Federation,
    test: Option<&Federation>,
    config: &TrainerConfig,
) -> Result<TrainingRun> {
    let mut t = Trainer::new(sheaf, train, config.clone());
    if let Some(test) = test {
        t = t.with_test(test);
    }
    t.run()
}

enum Coupling {
    /// Maps, and whether they are updated.
    Sheaf(RestrictionMaps, bool),
    /// Identity maps scaled by `√a_ij`, per adjacency slot.
    Consensus(Vec<Vec<f64>>),
    Local,
    Gossip,
}

struct Loop<'a> {
    sheaf: SheafGraph,
    train: &'a Federation,
    test: Option<&'a Federation>,
    config: &'a TrainerConfig,
    lambda: f64,
    ledger: CommLedger,
    history: Vec<RoundRecord>,
    trajectory: Vec<(Section, Option<RestrictionMaps>)>,
    events: Vec<Event>,
    d_theta_hat: f64,
}

impl<'a> Loop<'a> {
    fn exec(&self) -> Execution {
        self.config.execution
    }

    /// `(Ψ, mean local loss)` at a state.
    fn psi(&self, theta: &Section, maps: Option<&RestrictionMaps>) -> Result<(f64, f64)> {
        let f = local_loss_sum(self.train, theta, self.exec())?;
        let q = match maps {
            Some(m) if self.lambda > 0.0 => quadratic_form(&self.sheaf, m, theta)?,
            _ => 0.0,
        };
        Ok((f + 0.5 * self.lambda * q, f / self.train.n_clients() as f64))
    }

    fn psi_consensus(&self, theta: &Section, weights: &[Vec<f64>]) -> Result<(f64, f64)> {
        let f = local_loss_sum(self.train, theta, self.exec())?;
        let g = self.sheaf.graph();
        let mut q = 0.0;
        for (e, &(lo, hi)) in g.edges().iter().enumerate() {
            let [s_lo, _] = g.edge_slots(e);
            q += weights[lo][s_lo] * (&theta.0[hi] - &theta.0[lo]).norm_squared();
        }
        Ok((f + 0.5 * self.lambda * q, f / self.train.n_clients() as f64))
    }

    fn record(
        &mut self,
        round: usize,
        theta: &Section,
        maps: Option<&RestrictionMaps>,
        psi: (f64, f64),
    ) -> Result<()> {
        if !psi.0.is_finite() {
            return Err(Error::NonFinite { round });
        }
        let eval_now = round.is_multiple_of(self.config.eval_every) || round == self.config.rounds;
        let test = match self.test {
            Some(t) if eval_now => Some(evaluate(t, theta, self.exec())?),
            _ => None,
        };
        let norm = theta.norm();
        self.d_theta_hat = self.d_theta_hat.max(norm);
        if let Some(bound) = self.config.d_theta {
            if norm > bound {
                self.events
                    .push(Event::DomainExceeded { round, norm, bound });
            }
        }
        self.history.push(RoundRecord {
            round,
            psi: psi.0,
            train_loss: psi.1,
            bits_first_exchange: self
                .ledger
                .cumulative_bits(round, BitsConvention::FirstExchange),
            bits_exact: self.ledger.cumulative_bits(round, BitsConvention::Exact),
            test,
            max_theta_norm: theta.0.iter().map(|t| t.norm()).fold(0.0, f64::max),
            max_map_norm: maps.map_or(0.0, |m| m.max_frobenius()),
        });
        if self.config.record_trajectory {
            self.trajectory.push((theta.clone(), maps.cloned()));
        }
        Ok(())
    }
}

fn check_finite(round: usize, theta: &Section, maps: Option<&RestrictionMaps>) -> Result<()> {
    if !theta.is_finite() || maps.is_some_and(|m| !m.is_finite()) {
        return Err(Error::NonFinite { round });
    }
    Ok(())
}

fn equal_dim(sheaf: &SheafGraph, algorithm: Algorithm) -> Result<()> {
    let d = sheaf.stalk_dims();
    if d.iter().any(|&x| x != d[0]) {
        return Err(Error::param(
            "algorithm",
            format!("{algorithm} needs equal model dimensions, got {d:?}"),
        ));
    }
    Ok(())
}

impl<'a> Trainer<'a> {
    pub fn new(sheaf: &'a SheafGraph, train: &'a Federation, config: TrainerConfig) -> Self {
        Trainer {
            sheaf,
            train,
            test: None,
            config,
            theta0: None,
            maps0: None,
        }
    }

    pub fn with_test(mut self, test: &'a Federation) -> Self {
        self.test = Some(test);
        self
    }

    /// Starting models; zeros by default.
    pub fn with_initial_theta(mut self, theta: Section) -> Self {
        self.theta0 = Some(theta);
        self
    }

    /// Starting maps for `sheaf-fmtl`, replacing the configured initializer.
    pub fn with_initial_maps(mut self, maps: RestrictionMaps) -> Self {
        self.maps0 = Some(maps);
        self
    }

    fn batches(&self, rngs: &mut [ChaCha8Rng]) -> Option<Vec<Vec<usize>>> {
        let b = self.config.batch_size?;
        Some(
            self.train
                .clients
                .iter()
                .zip(rngs.iter_mut())
                .map(|(c, r)| {
                    let n = c.n_samples();
                    if b >= n {
                        (0..n).collect()
                    } else {
                        let mut idx = index::sample(r, n, b).into_vec();
                        idx.sort_unstable();
                        idx
                    }
                })
                .collect(),
        )
    }

    pub fn run(self) -> Result<TrainingRun> {
        let cfg = &self.config;
        cfg.validate()?;
        check_federation(self.sheaf, self.train)?;
        if let Some(t) = self.test {
            check_federation(self.sheaf, t)?;
        }
        let smoothness = cfg.smoothness.unwrap_or_else(|| self.train.smoothness());
        if smoothness.is_nan() || smoothness <= 0.0 {
            return Err(Error::param(
                "smoothness",
                "estimated smoothness is zero; set it explicitly",
            ));
        }
        let theta0 = match &self.theta0 {
            Some(t) => {
                t.check(self.sheaf)?;
                t.clone()
            }
            None => Section::zeros(self.sheaf),
        };

        let (sheaf, coupling, lambda) = match cfg.algorithm {
            Algorithm::SheafFmtl => {
                let maps = match &self.maps0 {
                    Some(m) => {
                        m.check(self.sheaf)?;
                        m.clone()
                    }
                    None => init_maps(&cfg.init, self.sheaf)?,
                };
                if maps.is_all_zero() && !cfg.allow_zero_maps {
                    return Err(Error::param(
                        "init",
                        "all-zero restriction maps receive zero gradient and stay zero, preventing the learning of \
                         interactions; training would reduce to local training",
                    ));
                }
                (
                    self.sheaf.clone(),
                    Coupling::Sheaf(maps, !cfg.freeze_maps),
                    cfg.lambda,
                )
            }
            Algorithm::Dfedu => {
                equal_dim(self.sheaf, cfg.algorithm)?;
                let g = self.sheaf.graph();
                let weights = (0..g.n_vertices())
                    .map(|i| vec![1.0; g.degree(i)])
                    .collect();
                (self.sheaf.clone(), Coupling::Consensus(weights), cfg.lambda)
            }
            Algorithm::Local => (self.sheaf.clone(), Coupling::Local, 0.0),
            Algorithm::Dpsgd => {
                equal_dim(self.sheaf, cfg.algorithm)?;
                (self.sheaf.clone(), Coupling::Gossip, 0.0)
            }
        };

        let maps_ref = match &coupling {
            Coupling::Sheaf(m, _) => Some(m),
            _ => None,
        };
        let learn = matches!(coupling, Coupling::Sheaf(_, true));
        let (mut auto_alpha, auto_eta) =
            auto_step_sizes(self.train, &sheaf, maps_ref, &theta0, lambda, smoothness)?;
        if let Coupling::Consensus(w) = &coupling {
            // L ⊗ I has the spectrum of the weighted graph Laplacian
            let scalar = build_sheaf(
                sheaf.graph().clone(),
                vec![1; sheaf.n_vertices()],
                EdgeDims::Gamma(1.0),
            )?;
            let unit = RestrictionMaps::from_fn(&scalar, |i, j, _, _| {
                let slot = scalar.graph().slot_of(i, j).expect("edge");
                DMatrix::from_element(1, 1, w[i][slot].sqrt())
            });
            auto_alpha = 1.0 / (smoothness + lambda * laplacian_norm_estimate(&scalar, &unit)?);
        }
        let alpha = cfg.alpha.unwrap_or(auto_alpha);
        let eta = if learn {
            cfg.eta.unwrap_or(auto_eta)
        } else {
            0.0
        };

        let n = sheaf.n_vertices();
        let mut ledger = CommLedger::new(n, cfg.scalar_bits);
        if cfg.log_messages {
            ledger = ledger.with_message_log();
        }
        let mut lp = Loop {
            sheaf,
            train: self.train,
            test: self.test,
            config: cfg,
            lambda,
            ledger,
            history: Vec::with_capacity(cfg.rounds + 1),
            trajectory: Vec::new(),
            events: Vec::new(),
            d_theta_hat: 0.0,
        };
        let mut batch_rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| {
                rng::stream(
                    cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64),
                    rng::BATCH,
                )
            })
            .collect();
        let monitor = cfg.monitor && cfg.batch_size.is_none();
        let mut checks = Vec::new();
        let mut theta = theta0;

        let final_maps = match coupling {
            Coupling::Sheaf(mut maps, learn) => {
                let mut psi = lp.psi(&theta, Some(&maps))?;
                lp.record(0, &theta, Some(&maps), psi)?;
                let graph = lp.sheaf.graph().clone();
                for k in 0..cfg.rounds {
                    lp.ledger.open_round(k);
                    let batches = self.batches(&mut batch_rngs);
                    let proj = client_projections(&lp.sheaf, &maps, &theta, lp.exec());
                    let inbox = exchange(&graph, proj.clone(), &mut lp.ledger, k, 0)?;
                    let grad_p_sq = if monitor {
                        grad_p_norm_sq(&lp.sheaf, &theta, &proj, &inbox, lambda)?
                    } else {
                        0.0
                    };
                    let up = theta_step(
                        &lp.sheaf,
                        self.train,
                        &theta,
                        &maps,
                        &inbox,
                        lambda,
                        alpha,
                        batches.as_deref(),
                        lp.exec(),
                    )?;
                    check_finite(k, &up.theta, None)?;
                    let mut grad_p_mid_sq = 0.0;
                    let next_maps = if learn {
                        let proj = client_projections(&lp.sheaf, &maps, &up.theta, lp.exec());
                        let inbox = exchange(&graph, proj.clone(), &mut lp.ledger, k, 1)?;
                        if monitor {
                            grad_p_mid_sq =
                                grad_p_norm_sq(&lp.sheaf, &up.theta, &proj, &inbox, lambda)?;
                        }
                        let next =
                            p_step(&lp.sheaf, &up.theta, &maps, &inbox, lambda, eta, lp.exec())?;
                        check_finite(k, &up.theta, Some(&next))?;
                        Some(next)
                    } else {
                        None
                    };
                    let psi_mid = if monitor && next_maps.is_some() {
                        lp.psi(&up.theta, Some(&maps))?.0
                    } else {
                        f64::NAN
                    };
                    if let Some(next) = next_maps {
                        maps = next;
                    }
                    let next_psi = lp.psi(&up.theta, Some(&maps))?;
                    let psi_mid = if psi_mid.is_nan() {
                        next_psi.0
                    } else {
                        psi_mid
                    };
                    theta = up.theta;
                    lp.record(k + 1, &theta, Some(&maps), next_psi)?;
                    if monitor {
                        let d_hat = lp.d_theta_hat;
                        let n_l = n as f64 * smoothness;
                        let theta_rhs = psi.0
                            - alpha * (1.0 - alpha * n_l / 2.0) * up.grad.norm_squared()
                            + DESCENT_SLACK;
                        let maps_rhs = psi_mid
                            - eta * (1.0 - eta * lambda * d_hat * d_hat / 2.0) * grad_p_mid_sq
                            + DESCENT_SLACK;
                        let check = DescentCheck {
                            round: k,
                            psi_before: psi.0,
                            psi_mid,
                            psi_after: next_psi.0,
                            grad_theta_sq: up.grad.norm_squared(),
                            grad_p_sq,
                            grad_p_mid_sq,
                            d_theta_hat: d_hat,
                            theta_ok: psi_mid <= theta_rhs,
                            maps_ok: next_psi.0 <= maps_rhs,
                        };
                        if !check.theta_ok {
                            lp.events.push(Event::DescentViolation {
                                round: k,
                                half: HalfStep::Theta,
                                excess: psi_mid - theta_rhs,
                            });
                        }
                        if !check.maps_ok {
                            lp.events.push(Event::DescentViolation {
                                round: k,
                                half: HalfStep::Maps,
                                excess: next_psi.0 - maps_rhs,
                            });
                        }
                        checks.push(check);
                    }
                    psi = next_psi;
                }
                Some(maps)
            }
            Coupling::Consensus(weights) => {
                let mut psi = lp.psi_consensus(&theta, &weights)?;
                lp.record(0, &theta, None, psi)?;
                let graph = lp.sheaf.graph().clone();
                for k in 0..cfg.rounds {
                    lp.ledger.open_round(k);
                    let batches = self.batches(&mut batch_rngs);
                    let outgoing = (0..n)
                        .map(|i| vec![theta.0[i].clone(); graph.degree(i)])
                        .collect();
                    let inbox = exchange(&graph, outgoing, &mut lp.ledger, k, 0)?;
                    let up = consensus_step(
                        &lp.sheaf,
                        self.train,
                        &theta,
                        &weights,
                        &inbox,
                        lambda,
                        alpha,
                        batches.as_deref(),
                        lp.exec(),
                    )?;
                    check_finite(k, &up.theta, None)?;
                    let next_psi = lp.psi_consensus(&up.theta, &weights)?;
                    theta = up.theta;
                    lp.record(k + 1, &theta, None, next_psi)?;
                    if monitor {
                        let n_l = n as f64 * smoothness;
                        let theta_rhs = psi.0
                            - alpha * (1.0 - alpha * n_l / 2.0) * up.grad.norm_squared()
                            + DESCENT_SLACK;
                        let check = DescentCheck {
                            round: k,
                            psi_before: psi.0,
                            psi_mid: next_psi.0,
                            psi_after: next_psi.0,
                            grad_theta_sq: up.grad.norm_squared(),
                            grad_p_sq: 0.0,
                            grad_p_mid_sq: 0.0,
                            d_theta_hat: lp.d_theta_hat,
                            theta_ok: next_psi.0 <= theta_rhs,
                            maps_ok: true,
                        };
                        if !check.theta_ok {
                            lp.events.push(Event::DescentViolation {
                                round: k,
                                half: HalfStep::Theta,
                                excess: next_psi.0 - theta_rhs,
                            });
                        }
                        checks.push(check);
                    }
                    psi = next_psi;
                }
                None
            }
            Coupling::Local => {
                let psi = lp.psi(&theta, None)?;
                lp.record(0, &theta, None, psi)?;
                for k in 0..cfg.rounds {
                    lp.ledger.open_round(k);
                    let batches = self.batches(&mut batch_rngs);
                    let next = exec::try_map_indexed(lp.exec(), n, |i| {
                        let batch = batches.as_ref().map(|b| b[i].as_slice());
                        let (_, g) = self.train.clients[i].loss_and_grad(&theta.0[i], batch)?;
                        let mut t = theta.0[i].clone();
                        t.axpy(-alpha, &g, 1.0);
                        Ok::<_, Error>(t)
                    })?;
                    theta = Section(next);
                    check_finite(k, &theta, None)?;
                    let psi = lp.psi(&theta, None)?;
                    lp.record(k + 1, &theta, None, psi)?;
                }
                None
            }
            Coupling::Gossip => {
                let weights = metropolis_weights(lp.sheaf.graph());
                let graph = lp.sheaf.graph().clone();
                let psi = lp.psi(&theta, None)?;
                lp.record(0, &theta, None, psi)?;
                for k in 0..cfg.rounds {
                    lp.ledger.open_round(k);
                    let batches = self.batches(&mut batch_rngs);
                    let outgoing = (0..n)
                        .map(|i| vec![theta.0[i].clone(); graph.degree(i)])
                        .collect();
                    let inbox = exchange(&graph, outgoing, &mut lp.ledger, k, 0)?;
                    let next = exec::try_map_indexed(lp.exec(), n, |i| {
                        let (self_w, w) = &weights[i];
                        let mut avg: DVector<f64> = &theta.0[i] * *self_w;
                        for (slot, wij) in w.iter().enumerate() {
                            avg.axpy(*wij, inbox.get(&graph, i, slot)?, 1.0);
                        }
                        let batch = batches.as_ref().map(|b| b[i].as_slice());
                        let (_, g) = self.train.clients[i].loss_and_grad(&avg, batch)?;
                        avg.axpy(-alpha, &g, 1.0);
                        Ok::<_, Error>(avg)
                    })?;
                    theta = Section(next);
                    check_finite(k, &theta, None)?;
                    let psi = lp.psi(&theta, None)?;
                    lp.record(k + 1, &theta, None, psi)?;
                }
                None
            }
        };

        Ok(TrainingRun {
            algorithm: cfg.algorithm,
            sheaf: lp.sheaf,
            theta,
            maps: final_maps,
            lambda,
            alpha,
            eta,
            smoothness,
            history: lp.history,
            checks,
            events: lp.events,
            ledger: lp.ledger,
            trajectory: lp.trajectory,
            d_theta_hat: lp.d_theta_hat,
        })
    }
}
