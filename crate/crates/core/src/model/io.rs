//! JSON file formats for models, agent-state machines and policies.
//!
//! Model: `{nS, nA, nY, gamma, rho, trans, reward, labels[, init_obs]}` with
//! `trans[s][a]` a list of `[s', y', prob]` triples and `reward[s][a]`.
//! Agent: `{nZ, z0, a0, phi}` with `phi[z][y][a]`.
//! Policy: `{period, nZ, nA, probs}` with `probs[ℓ][z][a]`.
//!
//! Floats are written in shortest round-trip form and parsed with correct
//! rounding, so save followed by load reproduces every field bit-for-bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    AgentStateMachine, Diagnostic, Labels, PeriodicPolicy, TabularPomdp, Transition,
};

#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(rename = "nS")]
    n_s: usize,
    #[serde(rename = "nA")]
    n_a: usize,
    #[serde(rename = "nY")]
    n_y: usize,
    gamma: f64,
    rho: Vec<f64>,
    trans: Vec<Vec<Vec<(usize, usize, f64)>>>,
    reward: Vec<Vec<f64>>,
    labels: Option<Labels>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    init_obs: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AgentFile {
    #[serde(rename = "nZ")]
    n_z: usize,
    z0: usize,
    a0: usize,
    phi: Vec<Vec<Vec<usize>>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PolicyFile {
    period: usize,
    #[serde(rename = "nZ")]
    n_z: usize,
    #[serde(rename = "nA")]
    n_a: usize,
    probs: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tie_break: Option<String>,
}

fn parse<'a, D: Deserialize<'a>>(text: &'a str, context: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|source| Error::Parse {
        context: context.to_string(),
        source,
    })
}

fn shape_error(msg: String) -> Error {
    Error::InvalidModel(vec![Diagnostic::Shape(msg)])
}

pub fn model_from_json(text: &str) -> Result<TabularPomdp<f64>> {
    let f: ModelFile = parse(text, "model")?;
    if f.trans.len() != f.n_s || f.trans.iter().any(|row| row.len() != f.n_a) {
        return Err(shape_error(format!(
            "trans must be {} x {} lists",
            f.n_s, f.n_a
        )));
    }
    if f.reward.len() != f.n_s || f.reward.iter().any(|row| row.len() != f.n_a) {
        return Err(shape_error(format!("reward must be {} x {}", f.n_s, f.n_a)));
    }
    let init_obs = match f.init_obs {
        Some(rows) => {
            if rows.len() != f.n_s || rows.iter().any(|r| r.len() != f.n_y) {
                return Err(shape_error(format!(
                    "init_obs must be {} x {}",
                    f.n_s, f.n_y
                )));
            }
            Some(rows.into_iter().flatten().collect())
        }
        None => None,
    };
    let model = TabularPomdp {
        n_states: f.n_s,
        n_actions: f.n_a,
        n_obs: f.n_y,
        trans: f
            .trans
            .into_iter()
            .flatten()
            .map(|row| {
                row.into_iter()
                    .map(|(s, y, p)| Transition::new(s, y, p))
                    .collect()
            })
            .collect(),
        reward: f.reward.into_iter().flatten().collect(),
        gamma: f.gamma,
        rho: f.rho,
        init_obs,
        labels: f.labels,
    };
    model.ensure_valid()?;
    Ok(model)
}

pub fn model_to_json(model: &TabularPomdp<f64>) -> String {
    let (ns, na, ny) = (model.n_states, model.n_actions, model.n_obs);
    let f = ModelFile {
        n_s: ns,
        n_a: na,
        n_y: ny,
        gamma: model.gamma,
        rho: model.rho.clone(),
        trans: (0..ns)
            .map(|s| {
                (0..na)
                    .map(|a| {
                        model
                            .transitions(s, a)
                            .iter()
                            .map(|t| (t.next_state, t.obs, t.prob))
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        reward: (0..ns)
            .map(|s| (0..na).map(|a| model.reward(s, a)).collect())
            .collect(),
        labels: model.labels.clone(),
        init_obs: model
            .init_obs
            .as_ref()
            .map(|e| e.chunks(ny).map(<[f64]>::to_vec).collect()),
    };
    serde_json::to_string_pretty(&f).expect("model serialises")
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TabularPomdp<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    model_from_json(&text).map_err(|e| match e {
        Error::Parse { source, .. } => Error::Parse {
            context: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn save_model(model: &TabularPomdp<f64>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(model) + "\n")?;
    Ok(())
}

pub fn agent_from_json(text: &str) -> Result<AgentStateMachine> {
    let f: AgentFile = parse(text, "agent")?;
    let n_y = f.phi.first().map_or(0, Vec::len);
    let n_a = f.phi.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if f.phi.len() != f.n_z
        || f.phi
            .iter()
            .any(|r| r.len() != n_y || r.iter().any(|c| c.len() != n_a))
    {
        return Err(Error::Dimension(format!(
            "phi must be a dense {} x nY x nA array",
            f.n_z
        )));
    }
    let phi = f.phi.into_iter().flatten().flatten().collect();
    AgentStateMachine::new(f.n_z, n_y, n_a, phi, f.z0, f.a0)
}

pub fn agent_to_json(agent: &AgentStateMachine) -> String {
    let (ny, na) = (agent.n_obs(), agent.n_actions());
    let phi = (0..agent.n_z())
        .map(|z| {
            (0..ny)
                .map(|y| (0..na).map(|a| agent.update(z, y, a)).collect())
                .collect()
        })
        .collect();
    let f = AgentFile {
        n_z: agent.n_z(),
        z0: agent.z0(),
        a0: agent.a0(),
        phi,
    };
    serde_json::to_string(&f).expect("agent serialises")
}

pub fn load_agent(path: impl AsRef<Path>) -> Result<AgentStateMachine> {
    agent_from_json(&fs::read_to_string(path)?)
}

pub fn save_agent(agent: &AgentStateMachine, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, agent_to_json(agent) + "\n")?;
    Ok(())
}

pub fn policy_from_json(text: &str) -> Result<PeriodicPolicy<f64>> {
    let f: PolicyFile = parse(text, "policy")?;
    if f.probs.len() != f.period
        || f.probs
            .iter()
            .any(|l| l.len() != f.n_z || l.iter().any(|z| z.len() != f.n_a))
    {
        return Err(Error::Dimension(format!(
            "probs must be {} x {} x {}",
            f.period, f.n_z, f.n_a
        )));
    }
    PeriodicPolicy::new(
        f.period,
        f.n_z,
        f.n_a,
        f.probs.into_iter().flatten().flatten().collect(),
    )
}

/// `tie_break` is recorded verbatim in the file when given.
pub fn policy_to_json(policy: &PeriodicPolicy<f64>, tie_break: Option<&str>) -> String {
    let probs = (0..policy.period())
        .map(|l| {
            (0..policy.n_z())
                .map(|z| policy.dist(l, z).to_vec())
                .collect()
        })
        .collect();
    let f = PolicyFile {
        period: policy.period(),
        n_z: policy.n_z(),
        n_a: policy.n_actions(),
        probs,
        tie_break: tie_break.map(str::to_string),
    };
    serde_json::to_string(&f).expect("policy serialises")
}

pub fn load_policy(path: impl AsRef<Path>) -> Result<PeriodicPolicy<f64>> {
    policy_from_json(&fs::read_to_string(path)?)
}

pub fn save_policy(
    policy: &PeriodicPolicy<f64>,
    tie_break: Option<&str>,
    path: impl AsRef<Path>,
) -> Result<()> {
    fs::write(path, policy_to_json(policy, tie_break) + "\n")?;
    Ok(())
}
