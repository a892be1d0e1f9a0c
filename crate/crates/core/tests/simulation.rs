//! Long simulated trajectories as oracles for the cyclic limit and the
//! induced periodic MDP.

mod common;

use pasql_core::chain::{build_joint_kernel, cyclic_stationary};
use pasql_core::dp::induce_periodic_mdp;
use pasql_core::model::envs::{fig4, fig4_behavior};
use pasql_core::model::sample_index;
use pasql_core::{AgentStateMachine, PeriodicPolicy, TabularPomdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Counts {
    visits: Vec<f64>,
    reward: Vec<f64>,
    next_z: Vec<f64>,
}

/// Visit counts, reward sums and successor agent-state counts per `(ℓ, z, a)`.
fn simulate(
    m: &TabularPomdp<f64>,
    agent: &AgentStateMachine,
    mu: &PeriodicPolicy<f64>,
    steps: u64,
    seed: u64,
) -> Counts {
    let (period, nz, na) = (mu.period(), agent.n_z(), m.n_actions);
    let cell = |l: usize, z: usize, a: usize| (l * nz + z) * na + a;
    let mut c = Counts {
        visits: vec![0.0; period * nz * na],
        reward: vec![0.0; period * nz * na],
        next_z: vec![0.0; period * nz * na * nz],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = sample_index(m.rho.iter().copied(), rng.gen());
    let y = sample_index(m.initial_obs_dist(s, agent.a0()), rng.gen());
    let mut z = agent.initial(y);
    for t in 1..=steps {
        let l = ((t - 1) % period as u64) as usize;
        let a = sample_index(mu.dist(l, z).iter().copied(), rng.gen());
        let row = &m.trans[s * na + a];
        let k = sample_index(row.iter().map(|t| t.prob), rng.gen());
        let i = cell(l, z, a);
        c.visits[i] += 1.0;
        c.reward[i] += m.reward[s * na + a];
        let z_next = agent.update(z, row[k].obs, a);
        c.next_z[i * nz + z_next] += 1.0;
        s = row[k].next_state;
        z = z_next;
    }
    c
}

fn check(m: &TabularPomdp<f64>, agent: &AgentStateMachine, mu: &PeriodicPolicy<f64>, seed: u64) {
    let steps = 600_000;
    let counts = simulate(m, agent, mu, steps, seed);
    let zeta = cyclic_stationary(&build_joint_kernel(m, agent, mu).unwrap(), false).unwrap();
    let pmdp = induce_periodic_mdp(m, agent, &zeta).unwrap();
    let (period, nz, na) = (mu.period(), agent.n_z(), m.n_actions);
    let per_phase = steps as f64 / period as f64;
    for l in 0..period {
        let za = zeta.marginal_za(l);
        for z in 0..nz {
            for a in 0..na {
                let i = (l * nz + z) * na + a;
                let n = counts.visits[i];
                let freq = n / per_phase;
                assert!(
                    (freq - za[z * na + a]).abs() < 0.01,
                    "visit frequency ({l},{z},{a}): {freq} vs {}",
                    za[z * na + a]
                );
                let r_hat = counts.reward[i] / n;
                assert!(
                    (r_hat - pmdp.reward(l, z, a)).abs() < 0.03,
                    "reward ({l},{z},{a}): {r_hat} vs {}",
                    pmdp.reward(l, z, a)
                );
                for (zn, &p) in pmdp.trans(l, z, a).iter().enumerate() {
                    let p_hat = counts.next_z[i * nz + zn] / n;
                    assert!(
                        (p_hat - p).abs() < 0.02,
                        "P({zn}|{l},{z},{a}): {p_hat} vs {p}"
                    );
                }
            }
        }
    }
}

#[test]
fn benchmark_visits_and_induced_model_match_simulation() {
    let m = fig4::<f64>(0.01).unwrap();
    let agent = AgentStateMachine::last_observation(2, 2);
    for k in 1..=3 {
        check(&m, &agent, &fig4_behavior(k).unwrap(), k as u64);
    }
}

#[test]
fn random_models_match_simulation() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for period in 1..=3 {
        let m = common::random_pomdp(&mut rng, 3, 2, 2, 0.9);
        let agent = AgentStateMachine::last_observation(2, 2);
        let mu = common::random_policy(&mut rng, period, 2, 2);
        check(&m, &agent, &mu, 40 + period as u64);
    }
}
