//! Desk-scale instantiation of the sub-optimality bound for PASQL limits.
//!
//! `ε^ℓ` and `δ^ℓ` are suprema over histories; here they are maxima over the
//! reachable history tree truncated at depth `H`, so they are lower
//! estimates and the resulting bound is indicative rather than certified.

use crate::dp::PeriodicMdp;
use crate::error::{Error, Result};
use crate::model::{AgentStateMachine, QTuple, TabularPomdp};

pub const DEFAULT_DEPTH: usize = 8;
pub const DEFAULT_NODE_CAP: usize = 1_000_000;
/// Branches whose probability falls to this level are pruned.
const PRUNE: f64 = 1e-15;

/// Integral probability metric and its Minkowski functional.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IpmSpec {
    /// Generated by `{f : span(f) ≤ 1}`: `d(ξ₁, ξ₂) = ½ ‖ξ₁ − ξ₂‖₁`, `ρ(f) = span(f)`.
    #[default]
    TotalVariation,
}

impl IpmSpec {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            IpmSpec::TotalVariation => {
                0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
            }
        }
    }

    pub fn minkowski(&self, f: &[f64]) -> f64 {
        match self {
            IpmSpec::TotalVariation => span(f),
        }
    }
}

pub fn span(f: &[f64]) -> f64 {
    let hi = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = f.iter().copied().fold(f64::INFINITY, f64::min);
    if f.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// One history, summarised by its belief and agent state.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryNode {
    pub belief: Vec<f64>,
    pub z: usize,
    pub phase: usize,
    pub path_prob: f64,
    /// Decision epoch `t ≥ 1`.
    pub depth: usize,
}

fn root_nodes(model: &TabularPomdp<f64>, agent: &AgentStateMachine) -> Vec<HistoryNode> {
    let ns = model.n_states;
    let mut out = Vec::new();
    for y in 0..model.n_obs {
        let mut belief: Vec<f64> = (0..ns)
            .map(|s| model.rho[s] * model.initial_obs_dist(s, agent.a0())[y])
            .collect();
        let mass: f64 = belief.iter().sum();
        if mass <= PRUNE {
            continue;
        }
        belief.iter_mut().for_each(|b| *b /= mass);
        out.push(HistoryNode {
            belief,
            z: agent.initial(y),
            phase: 0,
            path_prob: mass,
            depth: 1,
        });
    }
    out
}

/// Children of `node` under action `a`, one per observation with positive probability.
fn children(
    model: &TabularPomdp<f64>,
    agent: &AgentStateMachine,
    node: &HistoryNode,
    a: usize,
    period: usize,
) -> Vec<HistoryNode> {
    let (ns, ny) = (model.n_states, model.n_obs);
    let mut joint = vec![0.0; ny * ns];
    for (s, &b) in node.belief.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        for t in model.transitions(s, a) {
            joint[t.obs * ns + t.next_state] += b * t.prob;
        }
    }
    joint
        .chunks(ns)
        .enumerate()
        .filter_map(|(y, row)| {
            let mass: f64 = row.iter().sum();
            (mass > PRUNE).then(|| HistoryNode {
                belief: row.iter().map(|p| p / mass).collect(),
                z: agent.update(node.z, y, a),
                phase: (node.phase + 1) % period,
                path_prob: node.path_prob * mass,
                depth: node.depth + 1,
            })
        })
        .collect()
}

/// Per-phase `ε̂^ℓ` and `δ̂^ℓ` over histories of length `1..=depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsDelta {
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    pub depth: usize,
    pub nodes: usize,
}

/// `ε̂^ℓ = max |Σ_s b(s) r(s,a) − r^ℓ(z,a)|` and
/// `δ̂^ℓ = max d(P(z' | h, a), P^ℓ(· | z, a))` over every reachable history
/// `h` up to `depth` whose final epoch has phase `ℓ`, and every action.
pub fn compute_eps_delta(
    model: &TabularPomdp<f64>,
    agent: &AgentStateMachine,
    pmdp: &PeriodicMdp<f64>,
    depth: usize,
    ipm: IpmSpec,
    node_cap: usize,
) -> Result<EpsDelta> {
    model.ensure_valid()?;
    if depth == 0 {
        return Err(Error::InvalidArgument(
            "history depth must be at least 1".into(),
        ));
    }
    if pmdp.n_z() != agent.n_z() || pmdp.n_actions() != model.n_actions {
        return Err(Error::Dimension(
            "periodic MDP does not match the agent machine and model".into(),
        ));
    }
    let (period, nz, na) = (pmdp.period(), agent.n_z(), model.n_actions);
    let mut eps = vec![0.0f64; period];
    let mut delta = vec![0.0f64; period];
    let mut frontier = root_nodes(model, agent);
    let mut nodes = 0usize;
    let mut p_hist = vec![0.0; nz];
    for _ in 0..depth {
        nodes += frontier.len();
        if nodes > node_cap {
            return Err(Error::NodeCap { cap: node_cap });
        }
        let mut next = Vec::new();
        let last = frontier.first().is_some_and(|n| n.depth == depth);
        for node in &frontier {
            let l = node.phase;
            for a in 0..na {
                let r_hist: f64 = node
                    .belief
                    .iter()
                    .enumerate()
                    .map(|(s, b)| b * model.reward(s, a))
                    .sum();
                eps[l] = eps[l].max((r_hist - pmdp.reward(l, node.z, a)).abs());

                p_hist.fill(0.0);
                for (s, &b) in node.belief.iter().enumerate() {
                    for t in model.transitions(s, a) {
                        p_hist[agent.update(node.z, t.obs, a)] += b * t.prob;
                    }
                }
                delta[l] = delta[l].max(ipm.distance(&p_hist, pmdp.trans(l, node.z, a)));
                if !last {
                    next.extend(children(model, agent, node, a, period));
                }
            }
        }
        frontier = next;
    }
    Ok(EpsDelta {
        eps,
        delta,
        depth,
        nodes,
    })
}

/// Optimal expected discounted reward over the first `depth` epochs among all
/// history-dependent policies, by backward induction on the history tree.
pub fn history_optimal_value(
    model: &TabularPomdp<f64>,
    depth: usize,
    node_cap: usize,
) -> Result<f64> {
    model.ensure_valid()?;
    let agent = AgentStateMachine::constant(model.n_obs, model.n_actions);
    let mut used = 0;
    let mut total = 0.0;
    for root in root_nodes(model, &agent) {
        total += root.path_prob * belief_value(model, &agent, &root, depth, (&mut used, node_cap))?;
    }
    Ok(total)
}

fn belief_value(
    model: &TabularPomdp<f64>,
    agent: &AgentStateMachine,
    node: &HistoryNode,
    depth: usize,
    (used, cap): (&mut usize, usize),
) -> Result<f64> {
    *used += 1;
    if *used > cap {
        return Err(Error::NodeCap { cap });
    }
    let mut best = f64::NEG_INFINITY;
    for a in 0..model.n_actions {
        let mut v: f64 = node
            .belief
            .iter()
            .enumerate()
            .map(|(s, b)| b * model.reward(s, a))
            .sum();
        if node.depth < depth {
            for child in children(model, agent, node, a, 1) {
                let w = child.path_prob / node.path_prob;
                v +=
                    model.gamma * w * belief_value(model, agent, &child, depth, (&mut *used, cap))?;
            }
        }
        best = best.max(v);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub eps: Vec<f64>,
    pub delta: Vec<f64>,
    /// `ρ(V^ℓ_μ)` with `V^ℓ_μ(z) = max_a Q^ℓ_μ(z, a)`.
    pub span: Vec<f64>,
    pub depth: usize,
    /// `2 / (1 − γ^L) Σ_ℓ γ^ℓ [ε^ℓ + γ δ^ℓ ρ(V^{ℓ+1})]`, starting at phase 0.
    pub bound: f64,
    /// Always true: `ε̂`, `δ̂` come from a finite history tree.
    pub truncated: bool,
}

pub fn suboptimality_bound(
    eps_delta: &EpsDelta,
    q: &QTuple<f64>,
    gamma: f64,
    ipm: IpmSpec,
) -> Result<BoundReport> {
    let period = q.period();
    if eps_delta.eps.len() != period || eps_delta.delta.len() != period {
        return Err(Error::Dimension(format!(
            "eps/delta have {} phases but Q has {period}",
            eps_delta.eps.len()
        )));
    }
    let span: Vec<f64> = (0..period).map(|l| ipm.minkowski(&q.values(l))).collect();
    let sum: f64 = (0..period)
        .map(|l| {
            gamma.powi(l as i32)
                * (eps_delta.eps[l] + gamma * eps_delta.delta[l] * span[(l + 1) % period])
        })
        .sum();
    Ok(BoundReport {
        eps: eps_delta.eps.clone(),
        delta: eps_delta.delta.clone(),
        span,
        depth: eps_delta.depth,
        bound: 2.0 / (1.0 - gamma.powi(period as i32)) * sum,
        truncated: true,
    })
}

/// Rejects models with negative rewards, which the bound does not cover.
pub fn check_nonnegative_rewards(model: &TabularPomdp<f64>) -> Result<()> {
    match model.reward.iter().position(|&r| r < 0.0) {
        Some(i) => Err(Error::Assumption(format!(
            "reward[{}][{}] = {} is negative",
            i / model.n_actions,
            i % model.n_actions,
            model.reward[i]
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::envs::fig4;

    #[test]
    fn tv_is_half_l1_and_span() {
        let ipm = IpmSpec::TotalVariation;
        assert_eq!(ipm.distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(ipm.minkowski(&[3.0, -1.0, 2.0]), 4.0);
    }

    #[test]
    fn zero_inputs_give_zero_bound() {
        let ed = EpsDelta {
            eps: vec![0.0; 2],
            delta: vec![0.0; 2],
            depth: 3,
            nodes: 1,
        };
        let q = QTuple::from_vec(2, 1, 1, vec![5.0, 1.0]).unwrap();
        assert_eq!(
            suboptimality_bound(&ed, &q, 0.9, IpmSpec::TotalVariation)
                .unwrap()
                .bound,
            0.0
        );
    }

    #[test]
    fn flat_values_annihilate_delta() {
        let ed = EpsDelta {
            eps: vec![0.0; 2],
            delta: vec![0.7; 2],
            depth: 3,
            nodes: 1,
        };
        let q = QTuple::filled(2, 3, 2, 4.0);
        assert_eq!(
            suboptimality_bound(&ed, &q, 0.9, IpmSpec::TotalVariation)
                .unwrap()
                .bound,
            0.0
        );
    }

    #[test]
    fn history_value_depth_one_is_best_immediate_reward() {
        let m = fig4::<f64>(0.01).unwrap();
        // ρ = e₀, so the first reward is max_a r(0, a) = 0.5.
        assert!((history_optimal_value(&m, 1, 10).unwrap() - 0.5).abs() < 1e-15);
        let v2 = history_optimal_value(&m, 2, 100).unwrap();
        assert!(v2 >= 0.5);
    }

    #[test]
    fn node_cap_enforced() {
        let m = fig4::<f64>(0.01).unwrap();
        assert!(matches!(
            history_optimal_value(&m, 10, 5),
            Err(Error::NodeCap { .. })
        ));
    }
}
