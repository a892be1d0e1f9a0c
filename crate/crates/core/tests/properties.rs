mod common;

use pasql_core::chain::{build_joint_kernel, cyclic_stationary};
use pasql_core::dp::{bellman_residual, induce_periodic_mdp, solve_periodic_q};
use pasql_core::eval::{compute_eps_delta, cross_product_eval, IpmSpec};
use pasql_core::experiment::theoretical_limit;
use pasql_core::model::Transition;
use pasql_core::{AgentStateMachine, PeriodicPolicy, Rational, TabularPomdp};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pmf() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 4).prop_filter_map("nonzero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn total_variation_is_a_metric(a in pmf(), b in pmf(), c in pmf()) {
        let d = |x: &[f64], y: &[f64]| IpmSpec::TotalVariation.distance(x, y);
        prop_assert!(d(&a, &a).abs() <= 1e-12);
        prop_assert!((d(&a, &b) - d(&b, &a)).abs() <= 1e-12);
        prop_assert!(d(&a, &b) >= 0.0 && d(&a, &b) <= 1.0 + 1e-12);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn full_observation_limit_is_q_star(seed in any::<u64>(), period in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::full_observation(&mut rng, 3, 2, 0.8);
        let agent = AgentStateMachine::last_observation(3, 2);
        let q_star = common::flat_q_star(&m, 1e-14);
        let mu = common::random_policy(&mut rng, period, 3, 2);
        let lim = theoretical_limit(&m, &agent, &mu, 1e-13, false).unwrap();
        for l in 0..period {
            for (a, b) in lim.q.phase_table(l).iter().zip(&q_star) {
                prop_assert!((a - b).abs() <= 1e-9, "phase {l}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cyclic_limit_is_invariant_and_pmf(seed in any::<u64>(), period in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_pomdp(&mut rng, 3, 2, 2, 0.9);
        let agent = AgentStateMachine::last_observation(2, 2);
        let mu = common::random_policy(&mut rng, period, 2, 2);
        let jk = build_joint_kernel(&m, &agent, &mu).unwrap();
        let zeta = cyclic_stationary(&jk, false).unwrap();
        prop_assert!(zeta.cross_phase_residual(&jk.chain) <= 1e-10);
        prop_assert!(zeta.l_step_residual(&jk.chain) <= 1e-10);
        for l in 0..period {
            prop_assert!((zeta.phase(l).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(zeta.phase(l).iter().all(|&p| p >= -1e-15));
        }
    }

    #[test]
    fn induced_mdp_rows_are_pmfs_and_solution_is_fixed_point(seed in any::<u64>(), period in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_pomdp(&mut rng, 3, 2, 2, 0.9);
        let agent = AgentStateMachine::last_observation(2, 2);
        let mu = common::random_policy(&mut rng, period, 2, 2);
        let zeta = cyclic_stationary(&build_joint_kernel(&m, &agent, &mu).unwrap(), false).unwrap();
        let pmdp = induce_periodic_mdp(&m, &agent, &zeta).unwrap();
        for l in 0..period {
            for z in 0..2 {
                for a in 0..2 {
                    prop_assert!((pmdp.trans(l, z, a).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
            }
        }
        let q = solve_periodic_q(&pmdp, 1e-12, 1_000_000).unwrap();
        prop_assert!(bellman_residual(&pmdp, &q) <= 1e-11);
    }

    #[test]
    fn eps_delta_monotone_in_depth(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_pomdp(&mut rng, 3, 2, 2, 0.9);
        let agent = AgentStateMachine::last_observation(2, 2);
        let mu = common::random_policy(&mut rng, 2, 2, 2);
        let lim = theoretical_limit(&m, &agent, &mu, 1e-12, false).unwrap();
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
        for h in 1..=5 {
            let ed = compute_eps_delta(&m, &agent, &lim.pmdp, h, IpmSpec::TotalVariation, 1_000_000).unwrap();
            if let Some((pe, pd)) = &prev {
                prop_assert!(ed.eps.iter().zip(pe).all(|(a, b)| a >= b));
                prop_assert!(ed.delta.iter().zip(pd).all(|(a, b)| a >= b));
            }
            prev = Some((ed.eps, ed.delta));
        }
    }

    #[test]
    fn rational_and_float_evaluation_agree(
        quarters in prop::collection::vec(0i64..=4, 4),
        rewards in prop::collection::vec(-3i64..=3, 4),
        actions in prop::collection::vec(0usize..2, 2),
    ) {
        let trans = quarters
            .iter()
            .map(|&q| {
                vec![
                    Transition::new(0, 0, Rational::new(q, 4)),
                    Transition::new(1, 0, Rational::new(4 - q, 4)),
                ]
            })
            .collect();
        let m = TabularPomdp {
            n_states: 2,
            n_actions: 2,
            n_obs: 1,
            trans,
            reward: rewards.iter().map(|&r| Rational::from_integer(r)).collect(),
            gamma: Rational::new(1, 2),
            rho: vec![Rational::new(1, 2); 2],
            init_obs: None,
            labels: None,
        };
        let agent = AgentStateMachine::constant(1, 2);
        let pi = PeriodicPolicy::<Rational>::deterministic(2, 1, 2, &actions).unwrap();
        let exact = cross_product_eval(&m, &agent, &pi).unwrap();
        let float = cross_product_eval(&to_f64(&m), &agent, &pi.cast::<f64>()).unwrap();
        let exact_f = *exact.numer() as f64 / *exact.denom() as f64;
        prop_assert!((exact_f - float).abs() <= 1e-12);
    }
}

fn to_f64(m: &TabularPomdp<Rational>) -> TabularPomdp<f64> {
    let f = |x: &Rational| *x.numer() as f64 / *x.denom() as f64;
    TabularPomdp {
        n_states: m.n_states,
        n_actions: m.n_actions,
        n_obs: m.n_obs,
        trans: m
            .trans
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| Transition::new(t.next_state, t.obs, f(&t.prob)))
                    .collect()
            })
            .collect(),
        reward: m.reward.iter().map(f).collect(),
        gamma: f(&m.gamma),
        rho: m.rho.iter().map(f).collect(),
        init_obs: m.init_obs.as_ref().map(|v| v.iter().map(f).collect()),
        labels: m.labels.clone(),
    }
}

#[test]
fn frame_stack_of_two_with_actions_has_21_states() {
    let fs = AgentStateMachine::frame_stack(2, 2, 2, true).unwrap();
    assert_eq!(fs.n_z(), 1 + 4 + 16);
}

#[test]
fn limit_does_not_depend_on_behaviour_under_full_observation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = common::full_observation(&mut rng, 4, 2, 0.9);
    let agent = AgentStateMachine::last_observation(4, 2);
    let a = theoretical_limit(
        &m,
        &agent,
        &common::random_policy(&mut rng, 1, 4, 2),
        1e-13,
        false,
    )
    .unwrap();
    let b = theoretical_limit(
        &m,
        &agent,
        &common::random_policy(&mut rng, 2, 4, 2),
        1e-13,
        false,
    )
    .unwrap();
    for l in 0..2 {
        for (x, y) in b.q.phase_table(l).iter().zip(a.q.phase_table(0)) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}
