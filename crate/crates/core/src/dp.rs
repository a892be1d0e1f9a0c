//! Periodic MDPs over agent states: construction from a cyclic limit,
//! cyclic value iteration and greedy extraction.

use crate::chain::CyclicDistribution;
use crate::error::{Error, Result};
use crate::model::{AgentStateMachine, PeriodicPolicy, QTuple, TabularPomdp};
use crate::scalar::{Real, Scalar};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 1_000_000;
/// Actions whose value is within this of the row maximum count as tied.
pub const GREEDY_TIE_TOL: f64 = 1e-9;

/// `L` MDPs on `Z × A` used in cyclic order.
///
/// `trans[((ℓ * nZ + z) * nA + a) * nZ + z']` is `P^ℓ(z' | z, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicMdp<T> {
    period: usize,
    n_z: usize,
    n_actions: usize,
    reward: Vec<T>,
    trans: Vec<T>,
    gamma: T,
    unvisited: Vec<(usize, usize)>,
}

impl<T: Scalar> PeriodicMdp<T> {
    pub fn new(
        period: usize,
        n_z: usize,
        n_actions: usize,
        reward: Vec<T>,
        trans: Vec<T>,
        gamma: T,
    ) -> Result<Self> {
        let rows = period * n_z * n_actions;
        if rows == 0 {
            return Err(Error::InvalidArgument(
                "periodic MDP dimensions must be positive".into(),
            ));
        }
        if reward.len() != rows || trans.len() != rows * n_z {
            return Err(Error::Dimension(format!(
                "expected {rows} rewards and {} transition entries, got {} and {}",
                rows * n_z,
                reward.len(),
                trans.len()
            )));
        }
        for (i, row) in trans.chunks(n_z).enumerate() {
            let sum: T = row.iter().copied().sum();
            if row.iter().any(|&p| p < T::zero()) || (sum.as_f64() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "transition row {i} is not a PMF"
                )));
            }
        }
        if !(gamma >= T::zero() && gamma < T::one()) {
            return Err(Error::InvalidArgument(format!(
                "gamma = {} must lie in [0, 1)",
                gamma.as_f64()
            )));
        }
        Ok(Self {
            period,
            n_z,
            n_actions,
            reward,
            trans,
            gamma,
            unvisited: Vec::new(),
        })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn n_z(&self) -> usize {
        self.n_z
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    #[inline]
    fn row(&self, l: usize, z: usize, a: usize) -> usize {
        (l * self.n_z + z) * self.n_actions + a
    }

    pub fn reward(&self, l: usize, z: usize, a: usize) -> T {
        self.reward[self.row(l, z, a)]
    }

    /// `P^ℓ(· | z, a)`.
    pub fn trans(&self, l: usize, z: usize, a: usize) -> &[T] {
        let r = self.row(l, z, a);
        &self.trans[r * self.n_z..(r + 1) * self.n_z]
    }

    /// `(ℓ, z)` pairs with `ζ^ℓ(z) = 0`; their rows are conventional fill.
    pub fn unvisited(&self) -> &[(usize, usize)] {
        &self.unvisited
    }
}

/// `r^ℓ(z, a) = Σ_s r(s, a) ζ^ℓ(s | z)` and
/// `P^ℓ(z' | z, a) = Σ_{s, y'} 1{z' = φ(z, y', a)} P(y' | s, a) ζ^ℓ(s | z)`.
///
/// Agent states with `ζ^ℓ(z) = 0` get a uniform belief over `S` for the
/// reward, a uniform `P^ℓ(· | z, a)`, and are listed in `unvisited`.
pub fn induce_periodic_mdp<T: Scalar>(
    model: &TabularPomdp<T>,
    agent: &AgentStateMachine,
    zeta: &CyclicDistribution<T>,
) -> Result<PeriodicMdp<T>> {
    let codec = zeta.codec();
    if codec.n_s != model.n_states
        || codec.n_y != model.n_obs
        || codec.n_z != agent.n_z()
        || codec.n_a != model.n_actions
    {
        return Err(Error::Dimension(
            "cyclic distribution does not match the model and agent".into(),
        ));
    }
    let (period, nz, na, ns) = (zeta.period(), agent.n_z(), model.n_actions, model.n_states);
    let mut reward = vec![T::zero(); period * nz * na];
    let mut trans = vec![T::zero(); period * nz * na * nz];
    let mut unvisited = Vec::new();
    let uniform_s = T::one() / T::from_usize(ns).expect("small integer");
    let uniform_z = T::one() / T::from_usize(nz).expect("small integer");
    for l in 0..period {
        for z in 0..nz {
            let belief = zeta.cond_s_given_z(l, z);
            if belief.is_none() {
                unvisited.push((l, z));
            }
            for a in 0..na {
                let r = (l * nz + z) * na + a;
                let row = &mut trans[r * nz..(r + 1) * nz];
                match &belief {
                    Some(b) => {
                        reward[r] = (0..ns).map(|s| model.reward(s, a) * b[s]).sum();
                        for (s, &ps) in b.iter().enumerate() {
                            if ps == T::zero() {
                                continue;
                            }
                            for t in model.transitions(s, a) {
                                let z2 = agent.update(z, t.obs, a);
                                row[z2] = row[z2] + t.prob * ps;
                            }
                        }
                    }
                    None => {
                        reward[r] = (0..ns).map(|s| model.reward(s, a) * uniform_s).sum();
                        row.fill(uniform_z);
                    }
                }
            }
        }
    }
    let mut mdp = PeriodicMdp::new(period, nz, na, reward, trans, model.gamma)?;
    mdp.unvisited = unvisited;
    Ok(mdp)
}

fn row_max<T: Real>(row: &[T]) -> T {
    row.iter().copied().fold(T::neg_infinity(), T::max)
}

/// One application of `Q^ℓ ← r^ℓ + γ P^ℓ max Q^{ℓ+1}` to phase `l`, reading
/// `next` as the phase-`ℓ+1` values.
fn backup_phase<T: Real>(mdp: &PeriodicMdp<T>, l: usize, next: &[T], out: &mut [T]) {
    let (nz, na) = (mdp.n_z, mdp.n_actions);
    for z in 0..nz {
        for a in 0..na {
            let ev: T = mdp
                .trans(l, z, a)
                .iter()
                .zip(next)
                .map(|(&p, &v)| p * v)
                .sum();
            out[z * na + a] = mdp.reward(l, z, a) + mdp.gamma * ev;
        }
    }
}

/// `max |T Q − Q|` for the periodic Bellman operator.
pub fn bellman_residual<T: Real>(mdp: &PeriodicMdp<T>, q: &QTuple<T>) -> T {
    let mut out = vec![T::zero(); mdp.n_z * mdp.n_actions];
    let mut worst = T::zero();
    for l in 0..mdp.period {
        backup_phase(mdp, l, &q.values((l + 1) % mdp.period), &mut out);
        worst = worst.max(crate::scalar::max_abs_diff(&out, q.phase_table(l)));
    }
    worst
}

/// Cyclic value iteration sweeping `ℓ = L-1, …, 0`, so each phase reads the
/// values just written for `ℓ + 1`. Stops once a full round moves no entry by
/// more than `tol` and the Bellman residual is itself within `tol`.
pub fn solve_periodic_q<T: Real>(
    mdp: &PeriodicMdp<T>,
    tol: T,
    max_iters: usize,
) -> Result<QTuple<T>> {
    let (period, nz, na) = (mdp.period, mdp.n_z, mdp.n_actions);
    let block = nz * na;
    let mut q = vec![T::zero(); period * block];
    let mut scratch = vec![T::zero(); block];
    let mut change = T::infinity();
    for _ in 0..max_iters {
        change = T::zero();
        for l in (0..period).rev() {
            let next_phase = (l + 1) % period;
            let next: Vec<T> = q[next_phase * block..][..block]
                .chunks(na)
                .map(row_max)
                .collect();
            backup_phase(mdp, l, &next, &mut scratch);
            change = change.max(crate::scalar::max_abs_diff(
                &scratch,
                &q[l * block..][..block],
            ));
            q[l * block..][..block].copy_from_slice(&scratch);
        }
        if change <= tol {
            let out = QTuple::from_vec(period, nz, na, q.clone())?;
            if bellman_residual(mdp, &out) <= tol {
                return Ok(out);
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual: change.to_f64().unwrap_or(f64::NAN),
    })
}

/// V-form of [`solve_periodic_q`]: `V^ℓ(z) = max_a [r^ℓ(z,a) + γ Σ P^ℓ(z'|z,a) V^{ℓ+1}(z')]`.
pub fn solve_periodic_v<T: Real>(
    mdp: &PeriodicMdp<T>,
    tol: T,
    max_iters: usize,
) -> Result<Vec<Vec<T>>> {
    let (period, nz, na) = (mdp.period, mdp.n_z, mdp.n_actions);
    let mut v = vec![vec![T::zero(); nz]; period];
    let mut residual = T::infinity();
    for _ in 0..max_iters {
        let fresh: Vec<Vec<T>> = (0..period)
            .map(|l| {
                let next = &v[(l + 1) % period];
                (0..nz)
                    .map(|z| {
                        (0..na)
                            .map(|a| {
                                let ev: T = mdp
                                    .trans(l, z, a)
                                    .iter()
                                    .zip(next)
                                    .map(|(&p, &w)| p * w)
                                    .sum();
                                mdp.reward(l, z, a) + mdp.gamma * ev
                            })
                            .fold(T::neg_infinity(), T::max)
                    })
                    .collect()
            })
            .collect();
        residual = v
            .iter()
            .zip(&fresh)
            .map(|(a, b)| crate::scalar::max_abs_diff(a, b))
            .fold(T::zero(), T::max);
        v = fresh;
        if residual <= tol * (T::one() - mdp.gamma) {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Deterministic `π^ℓ(z) = argmax_a Q^ℓ(z, a)`, taking the lowest action
/// index among those within `tie_tol` of the maximum.
pub fn greedy<T: Scalar>(q: &QTuple<T>, tie_tol: f64) -> PeriodicPolicy<T> {
    let (period, nz) = (q.period(), q.n_z());
    let actions: Vec<usize> = (0..period)
        .flat_map(|l| (0..nz).map(move |z| (l, z)))
        .map(|(l, z)| argmax_tol(q.row(l, z), tie_tol))
        .collect();
    PeriodicPolicy::deterministic(period, nz, q.n_actions(), &actions).expect("argmax is in range")
}

/// Lowest index whose value is within `tie_tol` of the maximum.
pub fn argmax_tol<T: Scalar>(row: &[T], tie_tol: f64) -> usize {
    let best = row
        .iter()
        .map(|x| x.as_f64())
        .fold(f64::NEG_INFINITY, f64::max);
    row.iter()
        .position(|x| x.as_f64() >= best - tie_tol)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(period: usize, rewards: Vec<f64>, gamma: f64) -> PeriodicMdp<f64> {
        let trans = vec![1.0; period];
        PeriodicMdp::new(period, 1, 1, rewards, trans, gamma).unwrap()
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let m = single(3, vec![0.0; 3], 0.9);
        let q = solve_periodic_q(&m, 1e-12, 1000).unwrap();
        assert!(q.as_slice().iter().all(|&x| x == 0.0));
        assert!(solve_periodic_v(&m, 1e-12, 1000)
            .unwrap()
            .iter()
            .flatten()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn alternating_reward_geometric_series() {
        let g: f64 = 0.9;
        let m = single(2, vec![1.0, 0.0], g);
        let v = solve_periodic_v(&m, 1e-12, 100_000).unwrap();
        assert!((v[0][0] - 1.0 / (1.0 - g * g)).abs() < 1e-10);
        assert!((v[1][0] - g / (1.0 - g * g)).abs() < 1e-10);
        let q = solve_periodic_q(&m, 1e-12, 100_000).unwrap();
        assert!((q.get(0, 0, 0) - v[0][0]).abs() < 1e-10);
    }

    #[test]
    fn greedy_ties_pick_lowest_index() {
        let q = QTuple::from_vec(1, 2, 3, vec![1.0, 1.0, 0.0, 2.0, 3.0, 3.0 + 1e-12]).unwrap();
        let p = greedy(&q, GREEDY_TIE_TOL);
        assert_eq!(p.encoding().as_deref(), Some("01"));
        let strict = greedy(&q, 0.0);
        assert_eq!(strict.encoding().as_deref(), Some("02"));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(PeriodicMdp::new(1, 2, 1, vec![0.0; 2], vec![0.5, 0.4, 1.0, 0.0], 0.5).is_err());
        assert!(PeriodicMdp::new(1, 1, 1, vec![0.0], vec![1.0], 1.0).is_err());
    }
}
