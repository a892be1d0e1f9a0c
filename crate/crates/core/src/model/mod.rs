//! Finite POMDP models, agent-state machines and periodic policies.

mod agent;
pub mod envs;
mod generative;
pub mod io;
mod policy;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use agent::AgentStateMachine;
pub use generative::{sample_index, GenerativePomdp, Step};
pub use policy::{PeriodicPolicy, QTuple};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-sum tolerance for every PMF stored in a model.
pub const PMF_TOL: f64 = 1e-12;

/// One sparse entry of `P(s', y' | s, a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<T> {
    pub next_state: usize,
    pub obs: usize,
    pub prob: T,
}

impl<T> Transition<T> {
    pub fn new(next_state: usize, obs: usize, prob: T) -> Self {
        Self {
            next_state,
            obs,
            prob,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observations: Vec<String>,
}

/// A finite POMDP with state-action rewards.
///
/// `trans[s * n_actions + a]` lists the support of `P(·, · | s, a)`.
/// `init_obs`, when present, is the emission law of the first observation
/// given the first state (`init_obs[s * n_obs + y]`); when absent the first
/// observation is drawn from the observation marginal of `P(·, · | s, a0)`.
///
/// Fields are public for construction; [`TabularPomdp::validate`] checks the
/// stochasticity invariants and every algorithm in this crate calls
/// [`TabularPomdp::ensure_valid`] before use.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPomdp<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_obs: usize,
    pub trans: Vec<Vec<Transition<T>>>,
    pub reward: Vec<T>,
    pub gamma: T,
    pub rho: Vec<T>,
    pub init_obs: Option<Vec<T>>,
    pub labels: Option<Labels>,
}

/// A single violated model invariant.
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    Shape(String),
    IndexOutOfRange {
        state: usize,
        action: usize,
        next_state: usize,
        obs: usize,
    },
    NegativeProbability {
        state: usize,
        action: usize,
        prob: f64,
    },
    RowSum {
        state: usize,
        action: usize,
        sum: f64,
    },
    RhoSum(f64),
    RhoNegative {
        state: usize,
    },
    InitObsRow {
        state: usize,
        sum: f64,
    },
    Gamma(f64),
    NonFiniteReward {
        state: usize,
        action: usize,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Shape(msg) => write!(f, "shape: {msg}"),
            Diagnostic::IndexOutOfRange {
                state,
                action,
                next_state,
                obs,
            } => write!(
                f,
                "trans[{state}][{action}] has out-of-range entry (s'={next_state}, y'={obs})"
            ),
            Diagnostic::NegativeProbability {
                state,
                action,
                prob,
            } => {
                write!(
                    f,
                    "trans[{state}][{action}] has negative probability {prob}"
                )
            }
            Diagnostic::RowSum { state, action, sum } => {
                write!(f, "trans[{state}][{action}] sums to {sum}")
            }
            Diagnostic::RhoSum(sum) => write!(f, "rho sums to {sum}"),
            Diagnostic::RhoNegative { state } => write!(f, "rho[{state}] is negative"),
            Diagnostic::InitObsRow { state, sum } => write!(f, "init_obs[{state}] sums to {sum}"),
            Diagnostic::Gamma(g) => write!(f, "gamma = {g} is outside [0, 1)"),
            Diagnostic::NonFiniteReward { state, action } => {
                write!(f, "reward[{state}][{action}] is not finite")
            }
        }
    }
}

impl<T: Scalar> TabularPomdp<T> {
    #[inline]
    pub fn sa(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn transitions(&self, s: usize, a: usize) -> &[Transition<T>] {
        &self.trans[self.sa(s, a)]
    }

    pub fn reward(&self, s: usize, a: usize) -> T {
        self.reward[self.sa(s, a)]
    }

    /// `P(y' | s, a)`.
    pub fn obs_marginal(&self, s: usize, a: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_obs];
        for t in self.transitions(s, a) {
            out[t.obs] = out[t.obs] + t.prob;
        }
        out
    }

    /// `P(s' | s, a)`.
    pub fn state_marginal(&self, s: usize, a: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_states];
        for t in self.transitions(s, a) {
            out[t.next_state] = out[t.next_state] + t.prob;
        }
        out
    }

    /// Law of the first observation given the first state.
    pub fn initial_obs_dist(&self, s: usize, a0: usize) -> Vec<T> {
        match &self.init_obs {
            Some(e) => e[s * self.n_obs..(s + 1) * self.n_obs].to_vec(),
            None => self.obs_marginal(s, a0),
        }
    }

    /// `(min_r, max_r)` over all state-action pairs.
    pub fn reward_range(&self) -> (T, T) {
        let mut it = self.reward.iter().copied();
        let first = it.next().unwrap_or_else(T::zero);
        it.fold((first, first), |(lo, hi), r| {
            (if r < lo { r } else { lo }, if r > hi { r } else { hi })
        })
    }

    /// Every violated invariant; empty means the model is valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        let tol = T::lit(PMF_TOL);
        let (ns, na, ny) = (self.n_states, self.n_actions, self.n_obs);
        if ns == 0 || na == 0 || ny == 0 {
            diags.push(Diagnostic::Shape(format!(
                "nS={ns}, nA={na}, nY={ny} must all be positive"
            )));
            return diags;
        }
        if self.trans.len() != ns * na {
            diags.push(Diagnostic::Shape(format!(
                "trans has {} rows, expected {}",
                self.trans.len(),
                ns * na
            )));
        }
        if self.reward.len() != ns * na {
            diags.push(Diagnostic::Shape(format!(
                "reward has {} entries, expected {}",
                self.reward.len(),
                ns * na
            )));
        }
        if self.rho.len() != ns {
            diags.push(Diagnostic::Shape(format!(
                "rho has {} entries, expected {ns}",
                self.rho.len()
            )));
        }
        if let Some(e) = &self.init_obs {
            if e.len() != ns * ny {
                diags.push(Diagnostic::Shape(format!(
                    "init_obs has {} entries, expected {}",
                    e.len(),
                    ns * ny
                )));
            }
        }
        if !diags.is_empty() {
            return diags;
        }

        for s in 0..ns {
            for a in 0..na {
                let mut sum = T::zero();
                for t in self.transitions(s, a) {
                    if t.next_state >= ns || t.obs >= ny {
                        diags.push(Diagnostic::IndexOutOfRange {
                            state: s,
                            action: a,
                            next_state: t.next_state,
                            obs: t.obs,
                        });
                    }
                    if t.prob < T::zero() {
                        diags.push(Diagnostic::NegativeProbability {
                            state: s,
                            action: a,
                            prob: t.prob.as_f64(),
                        });
                    }
                    sum = sum + t.prob;
                }
                if (sum - T::one()).abs_val() > tol {
                    diags.push(Diagnostic::RowSum {
                        state: s,
                        action: a,
                        sum: sum.as_f64(),
                    });
                }
                if !self.reward(s, a).as_f64().is_finite() {
                    diags.push(Diagnostic::NonFiniteReward {
                        state: s,
                        action: a,
                    });
                }
            }
        }

        let rho_sum: T = self.rho.iter().copied().sum();
        if (rho_sum - T::one()).abs_val() > tol {
            diags.push(Diagnostic::RhoSum(rho_sum.as_f64()));
        }
        for (s, &p) in self.rho.iter().enumerate() {
            if p < T::zero() {
                diags.push(Diagnostic::RhoNegative { state: s });
            }
        }
        if let Some(e) = &self.init_obs {
            for s in 0..ns {
                let row = &e[s * ny..(s + 1) * ny];
                let sum: T = row.iter().copied().sum();
                if (sum - T::one()).abs_val() > tol || row.iter().any(|&p| p < T::zero()) {
                    diags.push(Diagnostic::InitObsRow {
                        state: s,
                        sum: sum.as_f64(),
                    });
                }
            }
        }
        if !(self.gamma >= T::zero() && self.gamma < T::one()) {
            diags.push(Diagnostic::Gamma(self.gamma.as_f64()));
        }
        diags
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let diags = self.validate();
        if diags.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(diags))
        }
    }

    /// Converts every number to another scalar type through `f64`.
    pub fn cast<U: Scalar>(&self) -> TabularPomdp<U> {
        let c = |x: T| U::lit(x.as_f64());
        TabularPomdp {
            n_states: self.n_states,
            n_actions: self.n_actions,
            n_obs: self.n_obs,
            trans: self
                .trans
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|t| Transition::new(t.next_state, t.obs, c(t.prob)))
                        .collect()
                })
                .collect(),
            reward: self.reward.iter().map(|&r| c(r)).collect(),
            gamma: c(self.gamma),
            rho: self.rho.iter().map(|&p| c(p)).collect(),
            init_obs: self
                .init_obs
                .as_ref()
                .map(|e| e.iter().map(|&p| c(p)).collect()),
            labels: self.labels.clone(),
        }
    }
}

/// Free-function form of [`TabularPomdp::validate`].
pub fn validate_model<T: Scalar>(model: &TabularPomdp<T>) -> Vec<Diagnostic> {
    model.validate()
}
