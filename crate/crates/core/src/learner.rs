//! Off-policy periodic agent-state Q-learning (PASQL) and its stationary
//! special case (ASQL).
//!
//! At epoch `t ≥ 1` with phase `ℓ = (t − 1) mod L` the agent draws
//! `a_t ∼ μ^ℓ(· | z_t)`, observes `(y_{t+1}, R_t)`, and updates the single cell
//! `Q^ℓ(z_t, a_t)` towards `R_t + γ max_a Q^{ℓ+1}(z_{t+1}, a)`.
//!
//! Randomness comes from two ChaCha8 streams of the run seed: stream 0 drives
//! the environment and stream 1 the behaviour policy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{sample_index, AgentStateMachine, GenerativePomdp, PeriodicPolicy, QTuple};

pub const ENV_STREAM: u64 = 0;
pub const POLICY_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    /// `c / n^ω` on the `n`-th visit to the cell.
    VisitationPoly {
        c: f64,
        omega: f64,
    },
    /// `start · (end / start)^{min(t, horizon) / horizon}`, shared by all cells.
    Exponential {
        start: f64,
        end: f64,
        horizon: u64,
    },
    Constant {
        alpha: f64,
    },
}

impl LrSchedule {
    /// Whether every cell visited infinitely often sees `Σα = ∞` and `Σα² < ∞`.
    pub fn is_square_summable(&self) -> bool {
        matches!(self, LrSchedule::VisitationPoly { omega, .. } if *omega > 0.5 && *omega <= 1.0)
    }

    /// Parameter checks. Polynomial exponents outside `(0.5, 1]` are refused
    /// unless `unchecked`.
    pub fn validate(&self, unchecked: bool) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match *self {
            LrSchedule::VisitationPoly { c, omega } => {
                if c.is_nan() || c <= 0.0 {
                    return bad(format!("visitation_poly needs c > 0, got {c}"));
                }
                if !unchecked && !(omega > 0.5 && omega <= 1.0) {
                    return bad(format!(
                        "visitation_poly exponent {omega} is outside (0.5, 1]"
                    ));
                }
                if omega.is_nan() || omega <= 0.0 {
                    return bad(format!(
                        "visitation_poly exponent must be positive, got {omega}"
                    ));
                }
            }
            LrSchedule::Exponential {
                start,
                end,
                horizon,
            } => {
                if !(start > 0.0 && end > 0.0) || horizon == 0 {
                    return bad("exponential schedule needs positive start, end and horizon".into());
                }
            }
            LrSchedule::Constant { alpha } => {
                if alpha.is_nan() || alpha <= 0.0 {
                    return bad(format!(
                        "constant learning rate must be positive, got {alpha}"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Learning rate at epoch `t ≥ 1` for a cell on its `visits`-th visit.
pub fn lr_value(schedule: &LrSchedule, t: u64, visits: u64) -> f64 {
    match *schedule {
        LrSchedule::VisitationPoly { c, omega } => c / (visits.max(1) as f64).powf(omega),
        LrSchedule::Exponential {
            start,
            end,
            horizon,
        } => {
            let frac = t.min(horizon) as f64 / horizon as f64;
            start * (end / start).powf(frac)
        }
        LrSchedule::Constant { alpha } => alpha,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LearnConfig {
    pub total_steps: u64,
    pub period: usize,
    pub seed: u64,
    pub log_every: u64,
    pub schedule: LrSchedule,
    pub q_init: f64,
    /// Accept schedules outside the convergence conditions.
    pub unchecked: bool,
}

impl LearnConfig {
    pub fn new(total_steps: u64, period: usize, seed: u64, schedule: LrSchedule) -> Self {
        Self {
            total_steps,
            period,
            seed,
            log_every: total_steps.max(1),
            schedule,
            q_init: 0.0,
            unchecked: false,
        }
    }

    pub fn with_log_every(mut self, log_every: u64) -> Self {
        self.log_every = log_every;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.log_every == 0 || self.period == 0 {
            return Err(Error::InvalidArgument(
                "total_steps, log_every and period must be at least 1".into(),
            ));
        }
        if !self.q_init.is_finite() {
            return Err(Error::InvalidArgument("q_init must be finite".into()));
        }
        self.schedule.validate(self.unchecked)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceMetadata {
    pub config: LearnConfig,
    pub algorithm: &'static str,
    pub phase_rule: &'static str,
    pub rng: &'static str,
    pub n_z: usize,
    pub n_actions: usize,
    pub z0: usize,
    pub a0: usize,
    pub gamma: f64,
    /// Episodes restarted after a terminal transition.
    pub restarts: u64,
    pub warnings: Vec<String>,
}

/// Snapshots of the Q-tuple during one learning run.
#[derive(Clone, Debug, PartialEq)]
pub struct QTrace {
    /// `(step, Q)` at every multiple of `log_every` and at `total_steps`.
    pub snapshots: Vec<(u64, QTuple<f64>)>,
    pub final_q: QTuple<f64>,
    pub metadata: TraceMetadata,
}

impl QTrace {
    /// CSV with header `step,phase,z,a,q`.
    pub fn to_csv(&self, fmt: impl Fn(f64) -> String) -> String {
        let mut out = String::from("step,phase,z,a,q\n");
        for (step, q) in &self.snapshots {
            for l in 0..q.period() {
                for z in 0..q.n_z() {
                    for a in 0..q.n_actions() {
                        out.push_str(&format!("{step},{l},{z},{a},{}\n", fmt(q.get(l, z, a))));
                    }
                }
            }
        }
        out
    }
}

/// Runs PASQL on a single continuing trajectory.
///
/// Episodic environments restart from their initial law after a terminal
/// transition (whose target is the reward alone); the epoch counter and so the
/// phase keep running across episodes.
pub fn run_pasql<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    mu: &PeriodicPolicy<f64>,
    cfg: &LearnConfig,
) -> Result<QTrace> {
    cfg.validate()?;
    if mu.period() != cfg.period {
        return Err(Error::InvalidArgument(format!(
            "behaviour policy has period {} but the learner uses {}",
            mu.period(),
            cfg.period
        )));
    }
    if agent.n_obs() != env.n_obs()
        || agent.n_actions() != env.n_actions()
        || mu.n_z() != agent.n_z()
    {
        return Err(Error::Dimension(
            "environment, agent machine and behaviour policy disagree".into(),
        ));
    }
    let gamma = env.gamma();
    if gamma >= 1.0 && !env.is_episodic() {
        return Err(Error::InvalidArgument(
            "gamma = 1 is only supported for episodic environments".into(),
        ));
    }

    let mut warnings = Vec::new();
    if !cfg.schedule.is_square_summable() {
        warnings.push(
            "learning-rate schedule is not square-summable; the limit is not guaranteed"
                .to_string(),
        );
    }

    let (period, nz, na) = (cfg.period, agent.n_z(), env.n_actions());
    let mut q = QTuple::filled(period, nz, na, cfg.q_init);
    let mut visits = vec![0u64; period * nz * na];
    let mut env_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    env_rng.set_stream(ENV_STREAM);
    let mut pol_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pol_rng.set_stream(POLICY_STREAM);

    let mut state = env.initial_state(&mut env_rng);
    let mut z = agent.initial(env.initial_observation(&state, agent.a0(), &mut env_rng));
    let mut snapshots = Vec::new();
    let mut restarts = 0;
    for t in 1..=cfg.total_steps {
        let l = ((t - 1) % period as u64) as usize;
        let next_l = (l + 1) % period;
        let a = sample_index(mu.dist(l, z).iter().copied(), pol_rng.gen());
        let step = env.step(&state, a, &mut env_rng);

        let cell = q.index(l, z, a);
        visits[cell] += 1;
        let alpha = lr_value(&cfg.schedule, t, visits[cell]);
        let z_next = agent.update(z, step.obs, a);
        let target = if step.terminal {
            step.reward
        } else {
            step.reward + gamma * q.value(next_l, z_next)
        };
        let old = q.get(l, z, a);
        q.set(l, z, a, old + alpha * (target - old));

        if step.terminal {
            restarts += 1;
            state = env.initial_state(&mut env_rng);
            z = agent.initial(env.initial_observation(&state, agent.a0(), &mut env_rng));
        } else {
            state = step.state;
            z = z_next;
        }
        if t % cfg.log_every == 0 || t == cfg.total_steps {
            snapshots.push((t, q.clone()));
        }
    }

    Ok(QTrace {
        snapshots,
        final_q: q,
        metadata: TraceMetadata {
            config: cfg.clone(),
            algorithm: if period == 1 { "ASQL" } else { "PASQL" },
            phase_rule: "phase(t) = (t - 1) mod L, t = 1, 2, ...",
            rng: "ChaCha8 (rand_chacha 0.3); env stream 0, policy stream 1",
            n_z: nz,
            n_actions: na,
            z0: agent.z0(),
            a0: agent.a0(),
            gamma,
            restarts,
            warnings,
        },
    })
}

/// Stationary agent-state Q-learning: PASQL with `L = 1`.
pub fn run_asql<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    mu: &PeriodicPolicy<f64>,
    cfg: &LearnConfig,
) -> Result<QTrace> {
    if mu.period() != 1 || cfg.period != 1 {
        return Err(Error::InvalidArgument(
            "ASQL needs a stationary behaviour policy and L = 1".into(),
        ));
    }
    run_pasql(env, agent, mu, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::envs::{fig4, fig4_behavior, Example3};

    #[test]
    fn schedule_values() {
        assert_eq!(
            lr_value(&LrSchedule::VisitationPoly { c: 1.0, omega: 1.0 }, 10, 3),
            1.0 / 3.0
        );
        let exp = LrSchedule::Exponential {
            start: 1e-3,
            end: 1e-5,
            horizon: 1_000_000,
        };
        assert!((lr_value(&exp, 1_000_000, 1) - 1e-5).abs() < 1e-18);
        assert!((lr_value(&exp, 0, 1) - 1e-3).abs() < 1e-18);
        assert_eq!(
            lr_value(&LrSchedule::Constant { alpha: 0.1 }, 12345, 7),
            0.1
        );
    }

    #[test]
    fn exponent_at_half_refused_unless_unchecked() {
        let s = LrSchedule::VisitationPoly { c: 1.0, omega: 0.5 };
        assert!(s.validate(false).is_err());
        assert!(s.validate(true).is_ok());
    }

    #[test]
    fn same_seed_same_trace() {
        let m = fig4::<f64>(0.01).unwrap();
        let agent = AgentStateMachine::last_observation(2, 2);
        let mu = fig4_behavior(1).unwrap();
        let cfg = LearnConfig::new(
            5_000,
            2,
            11,
            LrSchedule::VisitationPoly {
                c: 1.0,
                omega: 0.85,
            },
        )
        .with_log_every(1000);
        let a = run_pasql(&m, &agent, &mu, &cfg).unwrap();
        let b = run_pasql(&m, &agent, &mu, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.snapshots.iter().map(|s| s.0).collect::<Vec<_>>(),
            vec![1000, 2000, 3000, 4000, 5000]
        );
        let c = run_pasql(&m, &agent, &mu, &LearnConfig { seed: 12, ..cfg }).unwrap();
        assert_ne!(a.final_q, c.final_q);
    }

    #[test]
    fn final_snapshot_always_present() {
        let m = fig4::<f64>(0.01).unwrap();
        let agent = AgentStateMachine::last_observation(2, 2);
        let mu = fig4_behavior(2).unwrap();
        let cfg =
            LearnConfig::new(2_500, 2, 1, LrSchedule::Constant { alpha: 0.1 }).with_log_every(1000);
        let tr = run_pasql(&m, &agent, &mu, &cfg).unwrap();
        assert_eq!(tr.snapshots.last().unwrap().0, 2_500);
        assert_eq!(tr.snapshots.last().unwrap().1, tr.final_q);
    }

    #[test]
    fn episodic_restarts_are_counted() {
        let maze = Example3::new(1).unwrap();
        let agent = AgentStateMachine::last_observation(4, 5);
        let mu = PeriodicPolicy::uniform(3, 4, 5);
        let cfg = LearnConfig::new(10_000, 3, 3, LrSchedule::Constant { alpha: 0.1 });
        let tr = run_pasql(&maze, &agent, &mu, &cfg).unwrap();
        assert!(tr.metadata.restarts > 0);
    }
}
