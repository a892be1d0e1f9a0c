use crate::chain::check_dims;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{AgentStateMachine, PeriodicPolicy, TabularPomdp};
use crate::scalar::Scalar;

/// Markov chain on `S × Z` under a fixed periodic agent-state policy, with
/// index `s * nZ + z`.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossProductChain<T> {
    pub n_s: usize,
    pub n_z: usize,
    /// `r̄^ℓ(s, z) = Σ_a π^ℓ(a|z) r(s, a)`.
    pub reward: Vec<Vec<T>>,
    /// `P̄^ℓ = Σ_a π^ℓ(a|z) P(s', y'|s, a) 1{z' = φ(z, y', a)}`.
    pub trans: Vec<Matrix<T>>,
    pub gamma: T,
}

impl<T: Scalar> CrossProductChain<T> {
    pub fn build(
        model: &TabularPomdp<T>,
        agent: &AgentStateMachine,
        pi: &PeriodicPolicy<T>,
    ) -> Result<Self> {
        model.ensure_valid()?;
        check_dims(model, agent, pi)?;
        let (ns, nz, na) = (model.n_states, agent.n_z(), model.n_actions);
        let n = ns * nz;
        let mut reward = Vec::with_capacity(pi.period());
        let mut trans = Vec::with_capacity(pi.period());
        for l in 0..pi.period() {
            let mut r = vec![T::zero(); n];
            let mut p = Matrix::zeros(n, n);
            for s in 0..ns {
                for z in 0..nz {
                    let i = s * nz + z;
                    for (a, &pa) in pi.dist(l, z).iter().enumerate().take(na) {
                        if pa == T::zero() {
                            continue;
                        }
                        r[i] = r[i] + pa * model.reward(s, a);
                        for t in model.transitions(s, a) {
                            let j = t.next_state * nz + agent.update(z, t.obs, a);
                            p[(i, j)] = p[(i, j)] + pa * t.prob;
                        }
                    }
                }
            }
            reward.push(r);
            trans.push(p);
        }
        Ok(Self {
            n_s: ns,
            n_z: nz,
            reward,
            trans,
            gamma: model.gamma,
        })
    }

    pub fn period(&self) -> usize {
        self.trans.len()
    }

    /// `Ṽ = (I − γ^L P̃)^{-1} r̃`: the value of starting at a phase-`phase`
    /// epoch in each `(s, z)`, where `r̃` and `P̃` accumulate one full period.
    pub fn values(&self, phase: usize) -> Result<Vec<T>> {
        let (period, n) = (self.period(), self.n_s * self.n_z);
        let mut r_acc = vec![T::zero(); n];
        let mut prod = Matrix::identity(n);
        let mut disc = T::one();
        for k in 0..period {
            let l = (phase + k) % period;
            let pushed = prod.right_mul(&self.reward[l]);
            for (acc, v) in r_acc.iter_mut().zip(pushed) {
                *acc = *acc + disc * v;
            }
            prod = prod.matmul(&self.trans[l]);
            disc = disc * self.gamma;
        }
        let system = Matrix::identity(n).sub(&prod.scale(disc));
        system.solve(&r_acc)
    }
}

/// `P(s_1 = s, z_1 = z)` with `z_1 = φ(z0, y_1, a0)` and `y_1` drawn from
/// the model's first-observation law. Index `s * nZ + z`.
pub fn initial_sz_law<T: Scalar>(model: &TabularPomdp<T>, agent: &AgentStateMachine) -> Vec<T> {
    let nz = agent.n_z();
    let mut law = vec![T::zero(); model.n_states * nz];
    for (s, &ps) in model.rho.iter().enumerate() {
        if ps == T::zero() {
            continue;
        }
        for (y, py) in model
            .initial_obs_dist(s, agent.a0())
            .into_iter()
            .enumerate()
        {
            let i = s * nz + agent.initial(y);
            law[i] = law[i] + ps * py;
        }
    }
    law
}

/// Exact discounted return `J(π)` from the initial law, starting at phase 0.
pub fn cross_product_eval<T: Scalar>(
    model: &TabularPomdp<T>,
    agent: &AgentStateMachine,
    pi: &PeriodicPolicy<T>,
) -> Result<T> {
    let chain = CrossProductChain::build(model, agent, pi)?;
    let v = chain.values(0)?;
    Ok(initial_sz_law(model, agent)
        .into_iter()
        .zip(v)
        .map(|(p, v)| p * v)
        .sum())
}

/// `J(π_p)` for a single-observation, two-action model where `π_p` plays
/// action 1 with probability `p` at every step:
/// `ρ · (I − γ P_p)^{-1} r_p` with `(P_p, r_p) = (1 − p)(P_0, r_0) + p (P_1, r_1)`.
pub fn eval_stochastic_stationary<T: Scalar>(model: &TabularPomdp<T>, p: T) -> Result<T> {
    model.ensure_valid()?;
    if model.n_obs != 1 || model.n_actions != 2 {
        return Err(Error::InvalidArgument(format!(
            "needs a single-observation two-action model, got nY={}, nA={}",
            model.n_obs, model.n_actions
        )));
    }
    if p < T::zero() || p > T::one() {
        return Err(Error::InvalidArgument(format!(
            "p = {} outside [0, 1]",
            p.as_f64()
        )));
    }
    let ns = model.n_states;
    let w = [T::one() - p, p];
    let mut sys = Matrix::identity(ns);
    let mut r = vec![T::zero(); ns];
    for s in 0..ns {
        for (a, &wa) in w.iter().enumerate() {
            r[s] = r[s] + wa * model.reward(s, a);
            for (s2, ps) in model.state_marginal(s, a).into_iter().enumerate() {
                sys[(s, s2)] = sys[(s, s2)] - model.gamma * wa * ps;
            }
        }
    }
    let v = sys.solve(&r)?;
    Ok(model.rho.iter().zip(v).map(|(&q, v)| q * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::envs::{example2, fig4};
    use crate::Rational;

    #[test]
    fn zero_reward_gives_zero() {
        let mut m = fig4::<f64>(0.01).unwrap();
        m.reward.iter_mut().for_each(|r| *r = 0.0);
        let agent = AgentStateMachine::last_observation(2, 2);
        let pi = PeriodicPolicy::uniform(2, 2, 2);
        assert_eq!(cross_product_eval(&m, &agent, &pi).unwrap(), 0.0);
    }

    #[test]
    fn example2_always_drift_is_minus_five_exactly() {
        let m = example2::<Rational>();
        assert_eq!(
            eval_stochastic_stationary(&m, Rational::from_integer(1)).unwrap(),
            Rational::new(-5, 1)
        );
    }

    #[test]
    fn stochastic_stationary_matches_cross_product() {
        let m = example2::<f64>();
        let agent = AgentStateMachine::constant(1, 2);
        for &p in &[0.0, 0.39, 0.7, 1.0] {
            let pi = PeriodicPolicy::new(1, 1, 2, vec![1.0 - p, p]).unwrap();
            let a = cross_product_eval(&m, &agent, &pi).unwrap();
            let b = eval_stochastic_stationary(&m, p).unwrap();
            assert!((a - b).abs() < 1e-12, "p={p}: {a} vs {b}");
        }
    }

    #[test]
    fn period_l_values_are_consistent_across_phases() {
        // V^ℓ = r̄^ℓ + γ P̄^ℓ V^{ℓ+1}.
        let m = fig4::<f64>(0.01).unwrap();
        let agent = AgentStateMachine::last_observation(2, 2);
        let pi = PeriodicPolicy::deterministic(3, 2, 2, &[0, 1, 1, 1, 0, 0]).unwrap();
        let c = CrossProductChain::build(&m, &agent, &pi).unwrap();
        let v: Vec<Vec<f64>> = (0..3).map(|l| c.values(l).unwrap()).collect();
        for l in 0..3 {
            let next = c.trans[l].right_mul(&v[(l + 1) % 3]);
            for i in 0..v[l].len() {
                assert!((v[l][i] - c.reward[l][i] - 0.9 * next[i]).abs() < 1e-10);
            }
        }
    }
}
