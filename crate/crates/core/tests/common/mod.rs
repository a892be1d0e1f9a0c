//! Random model generators and small independent oracles shared by the
//! integration tests.
#![allow(dead_code)]

use pasql_core::model::Transition;
use pasql_core::{PeriodicPolicy, TabularPomdp};
use rand::Rng;

/// Strictly positive PMF of length `n`.
pub fn random_pmf<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Dense POMDP: every `(s', y')` reachable from every `(s, a)`.
pub fn random_pomdp<R: Rng>(
    rng: &mut R,
    ns: usize,
    na: usize,
    ny: usize,
    gamma: f64,
) -> TabularPomdp<f64> {
    let mut trans = Vec::with_capacity(ns * na);
    for _ in 0..ns * na {
        let p = random_pmf(rng, ns * ny);
        trans.push(
            (0..ns * ny)
                .map(|k| Transition::new(k / ny, k % ny, p[k]))
                .collect(),
        );
    }
    TabularPomdp {
        n_states: ns,
        n_actions: na,
        n_obs: ny,
        trans,
        reward: (0..ns * na).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        gamma,
        rho: random_pmf(rng, ns),
        init_obs: None,
        labels: None,
    }
}

/// Observation equals the next state; the first observation is the first state.
pub fn full_observation<R: Rng>(
    rng: &mut R,
    ns: usize,
    na: usize,
    gamma: f64,
) -> TabularPomdp<f64> {
    let mut trans = Vec::with_capacity(ns * na);
    for _ in 0..ns * na {
        let p = random_pmf(rng, ns);
        trans.push((0..ns).map(|s| Transition::new(s, s, p[s])).collect());
    }
    let mut init_obs = vec![0.0; ns * ns];
    for s in 0..ns {
        init_obs[s * ns + s] = 1.0;
    }
    TabularPomdp {
        n_states: ns,
        n_actions: na,
        n_obs: ns,
        trans,
        reward: (0..ns * na).map(|_| rng.gen_range(0.0..1.0)).collect(),
        gamma,
        rho: random_pmf(rng, ns),
        init_obs: Some(init_obs),
        labels: None,
    }
}

/// Full-support periodic policy.
pub fn random_policy<R: Rng>(
    rng: &mut R,
    period: usize,
    nz: usize,
    na: usize,
) -> PeriodicPolicy<f64> {
    let probs = (0..period * nz).flat_map(|_| random_pmf(rng, na)).collect();
    PeriodicPolicy::new(period, nz, na, probs).unwrap()
}

/// `Q*` of the fully observed MDP by plain value iteration.
pub fn flat_q_star(m: &TabularPomdp<f64>, tol: f64) -> Vec<f64> {
    let (ns, na) = (m.n_states, m.n_actions);
    let mut q = vec![0.0; ns * na];
    loop {
        let v: Vec<f64> = (0..ns)
            .map(|s| {
                q[s * na..(s + 1) * na]
                    .iter()
                    .copied()
                    .fold(f64::MIN, f64::max)
            })
            .collect();
        let next: Vec<f64> = (0..ns * na)
            .map(|i| {
                m.reward[i]
                    + m.gamma
                        * m.trans[i]
                            .iter()
                            .map(|t| t.prob * v[t.next_state])
                            .sum::<f64>()
            })
            .collect();
        let diff = next
            .iter()
            .zip(&q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next;
        if diff < tol {
            return q;
        }
    }
}
