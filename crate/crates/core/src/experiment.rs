//! Multi-seed learning runs, their summaries, and the exact limit pipeline
//! (cyclic limit → induced periodic MDP → Q_μ → greedy policy).

use rayon::prelude::*;

use crate::chain::{
    build_joint_kernel, check_assumption2, cyclic_stationary, AssumptionReport, CyclicDistribution,
};
use crate::dp::{
    greedy, induce_periodic_mdp, solve_periodic_q, PeriodicMdp, DEFAULT_MAX_ITERS, GREEDY_TIE_TOL,
};
use crate::error::{Error, Result};
use crate::learner::{run_pasql, LearnConfig, QTrace};
use crate::model::{AgentStateMachine, GenerativePomdp, PeriodicPolicy, QTuple, TabularPomdp};

/// Everything the exact pipeline produces for one behaviour policy.
#[derive(Clone, Debug)]
pub struct TheoreticalLimit {
    pub report: AssumptionReport,
    pub zeta: CyclicDistribution<f64>,
    pub pmdp: PeriodicMdp<f64>,
    pub q: QTuple<f64>,
    pub greedy: PeriodicPolicy<f64>,
}

/// Fails when the structural checks fail, unless `unchecked`.
pub fn theoretical_limit(
    model: &TabularPomdp<f64>,
    agent: &AgentStateMachine,
    mu: &PeriodicPolicy<f64>,
    tol: f64,
    unchecked: bool,
) -> Result<TheoreticalLimit> {
    let jk = build_joint_kernel(model, agent, mu)?;
    let report = check_assumption2(&jk);
    if !unchecked && !report.passes() {
        return Err(Error::Assumption(report.failures().join("; ")));
    }
    let zeta = cyclic_stationary(&jk, unchecked)?;
    let pmdp = induce_periodic_mdp(model, agent, &zeta)?;
    let q = solve_periodic_q(&pmdp, tol, DEFAULT_MAX_ITERS)?;
    let greedy = greedy(&q, GREEDY_TIE_TOL);
    Ok(TheoreticalLimit {
        report,
        zeta,
        pmdp,
        q,
        greedy,
    })
}

/// One learning run per seed, in parallel; results are in seed order.
pub fn run_seeds<E: GenerativePomdp>(
    env: &E,
    agent: &AgentStateMachine,
    mu: &PeriodicPolicy<f64>,
    cfg: &LearnConfig,
    seeds: &[u64],
) -> Result<Vec<QTrace>> {
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(
            "seed list contains duplicates".into(),
        ));
    }
    seeds
        .par_iter()
        .map(|&seed| {
            run_pasql(
                env,
                agent,
                mu,
                &LearnConfig {
                    seed,
                    ..cfg.clone()
                },
            )
        })
        .collect()
}

/// Linear-interpolation quantile of sorted data (`p ∈ [0, 1]`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Cross-seed statistics of one Q entry at one logged step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryRow {
    pub step: u64,
    pub phase: usize,
    pub z: usize,
    pub a: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

/// Median and quartiles per `(step, phase, z, a)`; traces must share their
/// snapshot steps.
pub fn summarize(traces: &[QTrace]) -> Result<Vec<SummaryRow>> {
    let first = traces
        .first()
        .ok_or_else(|| Error::InvalidArgument("no traces to summarise".into()))?;
    let steps: Vec<u64> = first.snapshots.iter().map(|s| s.0).collect();
    if traces
        .iter()
        .any(|t| t.snapshots.iter().map(|s| s.0).ne(steps.iter().copied()))
    {
        return Err(Error::InvalidArgument(
            "traces have different snapshot steps".into(),
        ));
    }
    let mut rows = Vec::new();
    for (k, &step) in steps.iter().enumerate() {
        let shape = &first.snapshots[k].1;
        for l in 0..shape.period() {
            for z in 0..shape.n_z() {
                for a in 0..shape.n_actions() {
                    let mut v: Vec<f64> = traces
                        .iter()
                        .map(|t| t.snapshots[k].1.get(l, z, a))
                        .collect();
                    v.sort_by(f64::total_cmp);
                    rows.push(SummaryRow {
                        step,
                        phase: l,
                        z,
                        a,
                        median: quantile(&v, 0.5),
                        q25: quantile(&v, 0.25),
                        q75: quantile(&v, 0.75),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `‖Q_final − Q_μ‖∞` per run.
pub fn sup_errors(traces: &[QTrace], limit: &QTuple<f64>) -> Vec<f64> {
    traces
        .iter()
        .map(|t| t.final_q.sup_distance(limit))
        .collect()
}
