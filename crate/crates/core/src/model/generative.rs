use std::fmt::Debug;

use rand::{Rng, RngCore};

use crate::model::TabularPomdp;
use crate::scalar::Real;

/// Outcome of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct Step<S> {
    pub state: S,
    pub obs: usize,
    pub reward: f64,
    /// The episode ended; the next state is absorbing and unused.
    pub terminal: bool,
}

/// A POMDP that can only be simulated.
///
/// Covers models whose state space is countable (no transition matrix) and
/// episodic tasks. Deterministic models must ignore the `rng` argument.
pub trait GenerativePomdp: Sync {
    type State: Clone + Debug + Send;

    fn n_actions(&self) -> usize;
    fn n_obs(&self) -> usize;
    fn gamma(&self) -> f64;
    /// Upper bound on `|r(s, a)|` over reachable pairs.
    fn reward_bound(&self) -> f64;
    fn is_deterministic(&self) -> bool;
    fn is_episodic(&self) -> bool {
        false
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> Self::State;
    fn initial_observation(&self, state: &Self::State, a0: usize, rng: &mut dyn RngCore) -> usize;
    fn step(&self, state: &Self::State, action: usize, rng: &mut dyn RngCore) -> Step<Self::State>;
}

/// Inverse-CDF draw from probability weights; `u ∈ [0, 1)`.
///
/// Falls back to the last positive entry when rounding leaves `u` above the
/// cumulative sum.
pub fn sample_index<I: IntoIterator<Item = f64>>(weights: I, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.into_iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

impl<T: Real> GenerativePomdp for TabularPomdp<T> {
    type State = usize;

    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn n_obs(&self) -> usize {
        self.n_obs
    }

    fn gamma(&self) -> f64 {
        self.gamma.as_f64()
    }

    fn reward_bound(&self) -> f64 {
        let (lo, hi) = self.reward_range();
        lo.as_f64().abs().max(hi.as_f64().abs())
    }

    fn is_deterministic(&self) -> bool {
        let point = |row: &[T]| row.iter().filter(|&&p| p > T::zero()).count() == 1;
        self.trans
            .iter()
            .all(|row| row.iter().filter(|t| t.prob > T::zero()).count() == 1)
            && point(&self.rho)
            && (0..self.n_states).all(|s| point(&self.initial_obs_dist(s, 0)))
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> usize {
        sample_index(self.rho.iter().map(|p| p.as_f64()), rng.gen())
    }

    fn initial_observation(&self, state: &usize, a0: usize, rng: &mut dyn RngCore) -> usize {
        sample_index(
            self.initial_obs_dist(*state, a0)
                .into_iter()
                .map(|p| p.as_f64()),
            rng.gen(),
        )
    }

    fn step(&self, state: &usize, action: usize, rng: &mut dyn RngCore) -> Step<usize> {
        let row = self.transitions(*state, action);
        let k = sample_index(row.iter().map(|t| t.prob.as_f64()), rng.gen());
        Step {
            state: row[k].next_state,
            obs: row[k].obs,
            reward: self.reward(*state, action).as_f64(),
            terminal: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf() {
        let w = [0.0, 0.25, 0.0, 0.75];
        assert_eq!(sample_index(w, 0.0), 1);
        assert_eq!(sample_index(w, 0.2499), 1);
        assert_eq!(sample_index(w, 0.25), 3);
        assert_eq!(sample_index(w, 0.999_999_999), 3);
        assert_eq!(sample_index([0.5, 0.5 - 1e-17], 1.0 - 1e-18), 1);
    }
}
