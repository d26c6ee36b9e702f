mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sheaf_fmtl::engine::*;
use sheaf_fmtl::netsim::BitsConvention;
use sheaf_fmtl::sheaf::*;
use sheaf_fmtl::tasks::*;
use sheaf_fmtl::Execution;

fn small_problem(seed: u64) -> (SheafGraph, Federation) {
    let mut r = rng(seed);
    let g = random_graph(&mut r, 6, 0.3);
    let s = build_sheaf(g, vec![4; 6], EdgeDims::Gamma(0.5)).unwrap();
    let fed = regression_fed(&mut r, s.stalk_dims(), 20, 0.01);
    (s, fed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>(), lambda in 0.0f64..2.0) {
        let mut r = rng(seed);
        let s = random_sheaf(&mut r, 5, 4, 3);
        let fed = regression_fed(&mut r, s.stalk_dims(), 8, 0.05);
        let maps = random_maps(&mut r, &s);
        let th = random_section(&mut r, &s);
        let gt = grad_theta_psi(&s, &fed, &th, &maps, lambda).unwrap();
        let ft = fd_grad_theta(&s, &fed, &th, &maps, lambda, 1e-6);
        prop_assert!(rel_err(gt.to_flat().as_slice(), ft.to_flat().as_slice()) <= 1e-5);
        let gp = grad_p_psi(&s, &th, &maps, lambda).unwrap();
        let fp = fd_grad_p(&s, &fed, &th, &maps, lambda, 1e-6);
        prop_assert!(rel_err(&flat_maps(&gp), &flat_maps(&fp)) <= 1e-5);
    }

    #[test]
    fn trainer_matches_matrix_form(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_sheaf(&mut r, 5, 3, 3);
        let fed = regression_fed(&mut r, s.stalk_dims(), 10, 0.01);
        let maps = random_maps(&mut r, &s);
        let th = random_section(&mut r, &s);
        let cfg = fixed_config(TrainerConfig::new(Algorithm::SheafFmtl).lambda(0.2).rounds(3), 0.02, 0.02);
        let run = Trainer::new(&s, &fed, cfg).with_initial_theta(th.clone()).with_initial_maps(maps.clone()).run().unwrap();
        let mut st = dense_state(&s, &th, &maps).unwrap();
        for k in 1..=3 {
            st = matrix_form_step(&s, &fed, &st, 0.2, 0.02, 0.02).unwrap();
            let (t, m) = dense_to_parts(&s, &st).unwrap();
            prop_assert!(t.max_abs_diff(&run.trajectory[k].0) <= 1e-10);
            prop_assert!(m.max_abs_diff(run.trajectory[k].1.as_ref().unwrap()) <= 1e-10);
        }
    }
}

#[test]
fn step_bound_values() {
    let b = step_bounds(10, 2.0, 0.5, 3.0).unwrap();
    assert!((b.alpha_max - 0.1).abs() < 1e-15);
    assert!((b.eta_max - 2.0 / 4.5).abs() < 1e-15);
    // α(1 − 20α/2) at α = 0.05 is 0.025; η(1 − 2.25η) at η = 0.2 is 0.11
    assert!((b.rho(0.05, 0.2) - 0.025).abs() < 1e-15);
    assert!((b.rho(0.05, 0.02) - 0.02 * (1.0 - 0.045)).abs() < 1e-15);
    assert!(b.admissible(0.05, 0.2));
    assert!(!b.admissible(0.1, 0.2));
    assert_eq!(
        step_bounds(3, 1.0, 0.0, 1.0).unwrap().eta_max,
        f64::INFINITY
    );
    assert!(step_bounds(3, 0.0, 1.0, 1.0).is_err());
}

#[test]
fn dpsgd_matches_gossip_oracle() {
    let (s, fed) = small_problem(3);
    let th0 = random_section(&mut rng(4), &s);
    let (alpha, rounds) = (0.05, 10);
    let cfg = fixed_config(
        TrainerConfig::new(Algorithm::Dpsgd).rounds(rounds),
        alpha,
        0.0,
    );
    let run = Trainer::new(&s, &fed, cfg)
        .with_initial_theta(th0.clone())
        .run()
        .unwrap();
    let g = s.graph();
    let n = g.n_vertices();
    let mut w = DMatrix::<f64>::zeros(n, n);
    for &(a, b) in g.edges() {
        let v = 1.0 / (1.0 + g.degree(a).max(g.degree(b)) as f64);
        w[(a, b)] = v;
        w[(b, a)] = v;
    }
    for i in 0..n {
        w[(i, i)] = 1.0 - w.row(i).sum();
    }
    for i in 0..n {
        assert!((w.column(i).sum() - 1.0).abs() < 1e-15);
    }
    let mut th = th0;
    for k in 1..=rounds {
        th = Section(
            (0..n)
                .map(|i| {
                    let avg = (0..n).fold(DVector::zeros(4), |acc: DVector<f64>, j| {
                        acc + &th.0[j] * w[(i, j)]
                    });
                    let gr = fed.clients[i].grad(&avg).unwrap();
                    avg - gr * alpha
                })
                .collect(),
        );
        assert!(th.max_abs_diff(&run.trajectory[k].0) < 1e-12);
    }
}

#[test]
fn baselines_need_equal_dimensions() {
    let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
    let s = build_sheaf(g, vec![2, 3, 2], EdgeDims::Gamma(1.0)).unwrap();
    let fed = regression_fed(&mut rng(1), s.stalk_dims(), 5, 0.0);
    for alg in [Algorithm::Dfedu, Algorithm::Dpsgd] {
        let cfg = TrainerConfig::new(alg).rounds(2);
        assert!(run_training(&s, &fed, None, &cfg).is_err());
    }
    let cfg = TrainerConfig::new(Algorithm::SheafFmtl).rounds(2);
    assert!(run_training(&s, &fed, None, &cfg).is_ok());
}

#[test]
fn auto_steps_descend_on_classification() {
    let spec = SynthSpec::new(
        Heterogeneity::FeatureRotationGroups { groups: 2 },
        8,
        6,
        TaskSpec::Classification { classes: 3 },
        40,
        2,
    );
    let fed = synth_federation(&spec).unwrap();
    let topo = sheaf_fmtl::netsim::gen_topology(&sheaf_fmtl::netsim::TopologySpec::new(
        sheaf_fmtl::netsim::TopologyKind::ErdosRenyi { p: 0.4 },
        8,
        2,
    ))
    .unwrap();
    let s = build_sheaf(topo.graph, fed.model_dims(), EdgeDims::Gamma(0.3)).unwrap();
    let cfg = TrainerConfig::new(Algorithm::SheafFmtl)
        .lambda(0.1)
        .rounds(40);
    let run = run_training(&s, &fed, None, &cfg).unwrap();
    assert_eq!(run.checks.len(), 40);
    assert!(run
        .events
        .iter()
        .all(|e| !matches!(e, Event::DescentViolation { .. })));
    let psi = run.psi_history();
    assert!(psi.windows(2).all(|w| w[1] <= w[0]));
    assert!(psi[40] < psi[0]);
    let h = run.hindsight().unwrap();
    assert!(h.eta_ok && h.descent_violations == 0);
}

#[test]
fn minibatch_is_seeded_and_skips_monitoring() {
    let (s, fed) = small_problem(5);
    let mut cfg = TrainerConfig::new(Algorithm::SheafFmtl)
        .lambda(0.1)
        .rounds(10);
    cfg.batch_size = Some(4);
    let a = run_training(&s, &fed, None, &cfg).unwrap();
    let b = run_training(&s, &fed, None, &cfg).unwrap();
    assert_eq!(a.theta, b.theta);
    assert!(a.checks.is_empty());
    cfg.batch_size = None;
    let full = run_training(&s, &fed, None, &cfg).unwrap();
    assert_ne!(a.theta, full.theta);
    cfg.batch_size = Some(4);
    cfg.seed = 9;
    assert_ne!(run_training(&s, &fed, None, &cfg).unwrap().theta, a.theta);
}

#[test]
fn frozen_maps_stay_put_and_skip_second_exchange() {
    let (s, fed) = small_problem(6);
    let mut cfg = TrainerConfig::new(Algorithm::SheafFmtl)
        .lambda(0.1)
        .rounds(5);
    cfg.freeze_maps = true;
    let init = init_maps(&cfg.init, &s).unwrap();
    let run = run_training(&s, &fed, None, &cfg).unwrap();
    assert_eq!(run.maps.as_ref().unwrap(), &init);
    assert_eq!(run.eta, 0.0);
    let rec = run.final_record();
    assert_eq!(
        rec.bits(BitsConvention::Exact),
        rec.bits(BitsConvention::FirstExchange)
    );
    cfg.freeze_maps = false;
    let learned = run_training(&s, &fed, None, &cfg).unwrap();
    let rec = learned.final_record();
    assert_eq!(
        rec.bits(BitsConvention::Exact),
        2 * rec.bits(BitsConvention::FirstExchange)
    );
}

#[test]
fn execution_modes_agree() {
    let (s, fed) = small_problem(8);
    let cfg = TrainerConfig::new(Algorithm::SheafFmtl)
        .lambda(0.1)
        .rounds(8);
    let par = run_training(&s, &fed, None, &cfg.clone().execution(Execution::Parallel)).unwrap();
    let seq = run_training(&s, &fed, None, &cfg.execution(Execution::Sequential)).unwrap();
    assert_eq!(par.theta, seq.theta);
    assert_eq!(par.maps, seq.maps);
    assert_eq!(par.psi_history(), seq.psi_history());
}

#[test]
fn orthogonal_init_has_orthonormal_rows() {
    let (s, _) = small_problem(9);
    let maps = init_maps(&InitSpec::new(InitKind::Orthogonal, 3), &s).unwrap();
    for p in maps.iter() {
        let ppt = p * p.transpose();
        assert!((ppt - DMatrix::identity(p.nrows(), p.nrows())).amax() < 1e-12);
    }
}

#[test]
fn history_and_evaluation() {
    let (s, fed) = small_problem(10);
    let mut cfg = TrainerConfig::new(Algorithm::Local).rounds(6);
    cfg.eval_every = 3;
    let run = Trainer::new(&s, &fed, cfg).with_test(&fed).run().unwrap();
    assert_eq!(run.history.len(), 7);
    let with_test: Vec<usize> = run
        .history
        .iter()
        .filter(|r| r.test.is_some())
        .map(|r| r.round)
        .collect();
    assert_eq!(with_test, vec![0, 3, 6]);
    assert_eq!(run.final_record().bits(BitsConvention::FirstExchange), 0);
    let m = run.final_record().test.as_ref().unwrap();
    assert!(m.p10 <= m.p50 && m.p50 <= m.p90);
    assert_eq!(m.per_client.len(), 6);
}

#[test]
fn percentile_interpolates() {
    let v = [4.0, 1.0, 3.0, 2.0];
    assert_eq!(percentile(&v, 0.0), 1.0);
    assert_eq!(percentile(&v, 1.0), 4.0);
    assert!((percentile(&v, 0.5) - 2.5).abs() < 1e-15);
    assert!((percentile(&v, 0.1) - 1.3).abs() < 1e-12);
}

#[test]
fn special_case_fixed_sheaves() {
    let g = Graph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    let fx = special_case_sheaf(&SpecialCase::ConventionalFl, &g, &[3; 4]).unwrap();
    let mut th = random_section(&mut rng(2), &fx.sheaf);
    assert!(quadratic_form(&fx.sheaf, &fx.maps, &th).unwrap() > 0.0);
    let c = th.0[0].clone();
    for b in th.0.iter_mut() {
        *b = c.clone();
    }
    assert_eq!(quadratic_form(&fx.sheaf, &fx.maps, &th).unwrap(), 0.0);
    let p = SpecialCase::PersonalizedFl;
    let fx = special_case_sheaf(&p, &g, &[3; 4]).unwrap();
    assert_eq!(fx.server, Some(0));
    assert_eq!(fx.sheaf.n_vertices(), 5);
    assert_eq!(fx.sheaf.graph().degree(0), 4);
    let sel = selection_matrix(&[2, 0], 3);
    assert_eq!(
        sel,
        DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    );
}
