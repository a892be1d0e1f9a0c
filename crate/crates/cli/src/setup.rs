//! Resolution of environment, agent and policy arguments.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pasql_core::learner::{LearnConfig, LrSchedule};
use pasql_core::model::envs::{
    example2, fig4, fig4_behavior, fig4_stationary_behavior, Example1, Example3, Goal,
};
use pasql_core::model::io::{load_agent, load_model, load_policy};
use pasql_core::model::GenerativePomdp;
use pasql_core::{AgentStateMachine, Policy, Pomdp};
use serde::Deserialize;

use crate::args::{EnvArgs, EnvName, GoalArg, LearnArgs, ScheduleKind};

/// Bad invocation; reported with exit code 2.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

macro_rules! usage {
    ($($arg:tt)*) => {
        anyhow::Error::new($crate::setup::Usage(format!($($arg)*)))
    };
}
pub(crate) use usage;

pub enum Env {
    Tabular(Pomdp),
    Counting(Example1),
    Maze(Example3),
}

/// Runs `$body` with `$e` bound to the concrete environment.
macro_rules! with_env {
    ($env:expr, $e:ident => $body:expr) => {
        match $env {
            $crate::setup::Env::Tabular($e) => $body,
            $crate::setup::Env::Counting($e) => $body,
            $crate::setup::Env::Maze($e) => $body,
        }
    };
}
pub(crate) use with_env;

impl Env {
    pub fn tabular(&self) -> Result<&Pomdp> {
        match self {
            Env::Tabular(m) => Ok(m),
            _ => Err(usage!(
                "this command needs a tabular model (fig4, example2 or --model)"
            )),
        }
    }

    pub fn n_obs(&self) -> usize {
        with_env!(self, e => e.n_obs())
    }

    pub fn n_actions(&self) -> usize {
        with_env!(self, e => e.n_actions())
    }

    pub fn is_deterministic(&self) -> bool {
        with_env!(self, e => e.is_deterministic())
    }
}

fn ensure_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(usage!("file not found: {}", path.display()))
    }
}

pub fn load_env(args: &EnvArgs) -> Result<Env> {
    if let Some(path) = &args.model {
        ensure_exists(path)?;
        return Ok(Env::Tabular(load_model(path)?));
    }
    let name = args
        .env
        .ok_or_else(|| usage!("one of --env or --model is required"))?;
    Ok(match name {
        EnvName::Fig4 => Env::Tabular(fig4(args.p)?),
        EnvName::Example1 => Env::Counting(Example1::default()),
        EnvName::Example2 => Env::Tabular(example2()),
        EnvName::Example3 => {
            let maze = Example3::new(args.n)?;
            Env::Maze(match args.goal {
                Some(GoalArg::Upper) => maze.with_goal(Goal::Upper),
                Some(GoalArg::Lower) => maze.with_goal(Goal::Lower),
                None => maze,
            })
        }
    })
}

pub fn load_agent_for(args: &EnvArgs, env: &Env) -> Result<AgentStateMachine> {
    match &args.agent {
        Some(path) => {
            ensure_exists(path)?;
            let agent = load_agent(path)?;
            if agent.n_obs() != env.n_obs() || agent.n_actions() != env.n_actions() {
                return Err(usage!(
                    "agent machine is for {} observations and {} actions; the environment has {} and {}",
                    agent.n_obs(),
                    agent.n_actions(),
                    env.n_obs(),
                    env.n_actions()
                ));
            }
            Ok(agent)
        }
        None => Ok(AgentStateMachine::last_observation(
            env.n_obs(),
            env.n_actions(),
        )),
    }
}

/// Built-in behaviour name or policy file, tiled to `period` when given.
pub fn behavior(spec: &str, agent: &AgentStateMachine, period: Option<usize>) -> Result<Policy> {
    let builtin = |k: usize, stationary: bool| -> Result<Policy> {
        if agent.n_z() != 2 || agent.n_actions() != 2 {
            return Err(usage!(
                "behaviour '{spec}' needs two agent states and two actions"
            ));
        }
        Ok(if stationary {
            fig4_stationary_behavior(k)?
        } else {
            fig4_behavior(k)?
        })
    };
    let mu = match spec {
        "mu1" | "mu2" | "mu3" => builtin(spec[2..].parse()?, false)?,
        "mubar1" | "mubar2" | "mubar3" => builtin(spec[5..].parse()?, true)?,
        "uniform" => Policy::uniform(period.unwrap_or(1), agent.n_z(), agent.n_actions()),
        path => {
            let path = PathBuf::from(path);
            if !path.exists() {
                return Err(usage!(
                    "unknown behaviour '{spec}': expected mu1..mu3, mubar1..mubar3, uniform or a policy file"
                ));
            }
            load_policy(&path)?
        }
    };
    if mu.n_z() != agent.n_z() || mu.n_actions() != agent.n_actions() {
        return Err(usage!(
            "behaviour policy shape does not match the agent machine"
        ));
    }
    match period {
        Some(l) if l != mu.period() => mu.repeat(l).map_err(|_| {
            usage!(
                "--L {l} is not a multiple of the behaviour period {}",
                mu.period()
            )
        }),
        _ => Ok(mu),
    }
}

/// Parses a base-`nA` digit string in `(ℓ, z)` order.
pub fn parse_actions(
    text: &str,
    n_z: usize,
    n_actions: usize,
    period: Option<usize>,
) -> Result<Policy> {
    let digits: Vec<usize> = text
        .chars()
        .map(|c| {
            c.to_digit(36)
                .map(|d| d as usize)
                .filter(|&d| d < n_actions)
        })
        .collect::<Option<_>>()
        .ok_or_else(|| usage!("--actions '{text}' must be digits below {n_actions}"))?;
    if digits.is_empty() || !digits.len().is_multiple_of(n_z) {
        return Err(usage!(
            "--actions needs a multiple of {n_z} digits, got {}",
            digits.len()
        ));
    }
    let l = digits.len() / n_z;
    if period.is_some_and(|p| p != l) {
        return Err(usage!(
            "--actions has {l} phases but --L is {}",
            period.unwrap_or_default()
        ));
    }
    Ok(Policy::deterministic(l, n_z, n_actions, &digits)?)
}

/// Learning experiment as read from a JSON config file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvArgs,
    pub behavior: String,
    #[serde(default)]
    pub period: Option<usize>,
    pub steps: u64,
    #[serde(default)]
    pub log_every: Option<u64>,
    pub schedule: LrSchedule,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
}

pub struct Experiment {
    pub env: Env,
    pub agent: AgentStateMachine,
    pub mu: Policy,
    pub cfg: LearnConfig,
    pub seeds: Vec<u64>,
}

fn schedule_from_flags(a: &LearnArgs) -> LrSchedule {
    match a.schedule {
        ScheduleKind::Exponential => LrSchedule::Exponential {
            start: a.lr_start,
            end: a.lr_end,
            horizon: a.lr_horizon.unwrap_or(a.steps),
        },
        ScheduleKind::Poly => LrSchedule::VisitationPoly {
            c: a.lr_c,
            omega: a.lr_omega,
        },
        ScheduleKind::Constant => LrSchedule::Constant { alpha: a.alpha },
    }
}

/// Resolves flags or a config file; seeds from `--seed-list` take precedence.
pub fn experiment(
    args: &LearnArgs,
    seed_list: Option<&[u64]>,
    unchecked: bool,
) -> Result<Experiment> {
    let cfg = match &args.config {
        Some(path) => {
            ensure_exists(path)?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<ExperimentConfig>(&text)
                .map_err(|e| usage!("config {}: {e}", path.display()))?
        }
        None => ExperimentConfig {
            env: args.env.clone(),
            behavior: args
                .behavior
                .clone()
                .ok_or_else(|| usage!("--behavior is required"))?,
            period: args.period,
            steps: args.steps,
            log_every: args.log_every,
            schedule: schedule_from_flags(args),
            seeds: None,
        },
    };
    let env = load_env(&cfg.env)?;
    let agent = load_agent_for(&cfg.env, &env)?;
    let mu = behavior(&cfg.behavior, &agent, cfg.period)?;
    let seeds = seed_list
        .map(<[u64]>::to_vec)
        .or(cfg.seeds)
        .unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return Err(usage!("seed list is empty"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(usage!("seed list contains duplicates"));
    }
    let mut learn = LearnConfig::new(cfg.steps, mu.period(), seeds[0], cfg.schedule);
    if let Some(every) = cfg.log_every {
        learn = learn.with_log_every(every);
    }
    learn.unchecked = unchecked;
    Ok(Experiment {
        env,
        agent,
        mu,
        cfg: learn,
        seeds,
    })
}
