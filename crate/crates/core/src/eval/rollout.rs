use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{sample_index, AgentStateMachine, GenerativePomdp, PeriodicPolicy};

/// Step cap for episodic rollouts, which have no discount to truncate on.
pub const EPISODE_STEP_CAP: u64 = 1_000_000;

/// Smallest `T` with `γ^T R_max / (1 − γ) < tail_tol`.
pub fn horizon_for(gamma: f64, reward_bound: f64, tail_tol: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!(
            "a truncation horizon needs gamma < 1, got {gamma}"
        )));
    }
    if tail_tol <= 0.0 {
        return Err(Error::InvalidArgument(
            "tail tolerance must be positive".into(),
        ));
    }
    let tail = |t: u64| gamma.powf(t as f64) * reward_bound / (1.0 - gamma);
    let mut t = if gamma == 0.0 || reward_bound == 0.0 {
        1
    } else {
        ((tail_tol * (1.0 - gamma) / reward_bound).ln() / gamma.ln())
            .floor()
            .max(1.0) as u64
    };
    while tail(t) >= tail_tol {
        t += 1;
    }
    Ok(t)
}

fn check_dims<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    n_z: usize,
    n_a: usize,
) -> Result<()> {
    if agent.n_obs() != env.n_obs()
        || agent.n_actions() != env.n_actions()
        || n_z != agent.n_z()
        || n_a != env.n_actions()
    {
        return Err(Error::Dimension(
            "environment, agent machine and policy disagree on nY, nZ or nA".into(),
        ));
    }
    Ok(())
}

/// Result of a single deterministic rollout.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutOutcome {
    pub value: f64,
    /// Number of rewards collected.
    pub steps: u64,
    /// 1-based index of the state in which the episode ended, if it did.
    pub terminal_state_index: Option<u64>,
}

/// Exact return of a deterministic policy on a deterministic environment,
/// truncated once the discounted tail is below `tail_tol` (or at the end of
/// the episode for episodic environments).
pub fn rollout_eval_deterministic<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    pi: &PeriodicPolicy<f64>,
    tail_tol: f64,
) -> Result<RolloutOutcome> {
    if !pi.is_deterministic() {
        return Err(Error::InvalidArgument(
            "rollout evaluation needs a deterministic policy".into(),
        ));
    }
    let actions: Vec<usize> = (0..pi.period())
        .flat_map(|l| (0..pi.n_z()).map(move |z| (l, z)))
        .map(|(l, z)| pi.action(l, z).expect("deterministic"))
        .collect();
    check_dims(env, agent, pi.n_z(), pi.n_actions())?;
    rollout_actions(env, agent, pi.period(), &actions, tail_tol)
}

/// [`rollout_eval_deterministic`] on a bare action table `actions[ℓ * nZ + z]`.
pub fn rollout_actions<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    period: usize,
    actions: &[usize],
    tail_tol: f64,
) -> Result<RolloutOutcome> {
    if !env.is_deterministic() {
        return Err(Error::InvalidArgument(
            "rollout evaluation needs a deterministic environment".into(),
        ));
    }
    let gamma = env.gamma();
    let horizon = if env.is_episodic() && gamma >= 1.0 {
        EPISODE_STEP_CAP
    } else {
        horizon_for(gamma, env.reward_bound(), tail_tol)?
    };
    let nz = agent.n_z();
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let mut state = env.initial_state(&mut rng);
    let mut z = agent.initial(env.initial_observation(&state, agent.a0(), &mut rng));
    let (mut value, mut disc) = (0.0, 1.0);
    for t in 1..=horizon {
        let phase = ((t - 1) % period as u64) as usize;
        let a = actions[phase * nz + z];
        let step = env.step(&state, a, &mut rng);
        value += disc * step.reward;
        disc *= gamma;
        if step.terminal {
            return Ok(RolloutOutcome {
                value,
                steps: t,
                terminal_state_index: Some(t + 1),
            });
        }
        z = agent.update(z, step.obs, a);
        state = step.state;
    }
    if env.is_episodic() && gamma >= 1.0 {
        return Err(Error::NonConvergence {
            iterations: horizon as usize,
            residual: f64::NAN,
        });
    }
    Ok(RolloutOutcome {
        value,
        steps: horizon,
        terminal_state_index: None,
    })
}

/// Monte-Carlo estimate of `J(π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_rollouts: usize,
    pub horizon: u64,
}

/// Discounted returns of `n_rollouts` independent rollouts. Rollout `i` uses
/// the ChaCha8 stream `i` of `seed`, so results do not depend on thread count.
///
/// `horizon` defaults to the truncation point for `tail_tol`; episodic
/// environments with `γ = 1` run to termination.
pub fn mc_eval<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    pi: &PeriodicPolicy<f64>,
    horizon: Option<u64>,
    tail_tol: f64,
    n_rollouts: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_dims(env, agent, pi.n_z(), pi.n_actions())?;
    let gamma = env.gamma();
    let episodic_undiscounted = env.is_episodic() && gamma >= 1.0;
    if gamma >= 1.0 && !env.is_episodic() {
        return Err(Error::InvalidArgument(
            "gamma = 1 needs an episodic environment".into(),
        ));
    }
    if n_rollouts == 0 {
        return Err(Error::InvalidArgument("need at least one rollout".into()));
    }
    let horizon = match horizon {
        Some(h) => h,
        None if episodic_undiscounted => EPISODE_STEP_CAP,
        None => horizon_for(gamma, env.reward_bound(), tail_tol)?,
    };
    let returns: Vec<f64> = (0..n_rollouts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            single_return(env, agent, pi, horizon, &mut rng)
        })
        .collect();
    let n = n_rollouts as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = if n_rollouts > 1 {
        returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        stderr: (var / n).sqrt(),
        n_rollouts,
        horizon,
    })
}

fn single_return<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    pi: &PeriodicPolicy<f64>,
    horizon: u64,
    rng: &mut dyn RngCore,
) -> f64 {
    let gamma = env.gamma();
    let mut state = env.initial_state(rng);
    let mut z = agent.initial(env.initial_observation(&state, agent.a0(), rng));
    let (mut ret, mut disc) = (0.0, 1.0);
    for t in 1..=horizon {
        let a = sample_index(pi.dist(pi.phase_at(t), z).iter().copied(), rng.gen());
        let step = env.step(&state, a, rng);
        ret += disc * step.reward;
        disc *= gamma;
        if step.terminal {
            break;
        }
        z = agent.update(z, step.obs, a);
        state = step.state;
    }
    ret
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::envs::{Example1, Example3, Goal};

    #[test]
    fn horizon_meets_tail() {
        let t = horizon_for(0.9, 1.0, 1e-4).unwrap();
        assert!(0.9f64.powi(t as i32) * 10.0 < 1e-4);
        assert!(0.9f64.powi(t as i32 - 1) * 10.0 >= 1e-4);
        assert!(horizon_for(1.0, 1.0, 1e-4).is_err());
    }

    #[test]
    fn example1_closed_forms() {
        let env = Example1::default();
        let agent = AgentStateMachine::last_observation(2, 2);
        let g: f64 = 0.9;
        let always0 = PeriodicPolicy::deterministic(1, 2, 2, &[0, 0]).unwrap();
        let v = rollout_eval_deterministic(&env, &agent, &always0, 1e-10)
            .unwrap()
            .value;
        assert!((v - (1.0 + g - g * g) / (1.0 - g.powi(3))).abs() < 1e-9);
        let alt = PeriodicPolicy::deterministic(1, 2, 2, &[0, 1]).unwrap();
        let v = rollout_eval_deterministic(&env, &agent, &alt, 1e-10)
            .unwrap()
            .value;
        assert!((v - 1.0 / (1.0 + g)).abs() < 1e-9);
    }

    #[test]
    fn stochastic_inputs_rejected() {
        let agent = AgentStateMachine::last_observation(2, 2);
        let pi = PeriodicPolicy::uniform(1, 2, 2);
        assert!(rollout_eval_deterministic(&Example1::default(), &agent, &pi, 1e-4).is_err());
        let maze = Example3::new(1).unwrap();
        let agent = AgentStateMachine::last_observation(4, 5);
        assert!(
            rollout_eval_deterministic(&maze, &agent, &Example3::reference_policy(), 1e-4).is_err()
        );
        let fixed = maze.with_goal(Goal::Upper);
        assert!(
            rollout_eval_deterministic(&fixed, &agent, &Example3::reference_policy(), 1e-4).is_ok()
        );
    }

    #[test]
    fn mc_is_seed_deterministic() {
        let maze = Example3::new(2).unwrap();
        let agent = AgentStateMachine::last_observation(4, 5);
        let pi = Example3::reference_policy();
        let a = mc_eval(&maze, &agent, &pi, None, 1e-6, 200, 7).unwrap();
        let b = mc_eval(&maze, &agent, &pi, None, 1e-6, 200, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mean, 1.0);
    }
}
