use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use pasql_core::chain::{
    build_joint_kernel, check_assumption2, cyclic_stationary, AssumptionReport,
};
use pasql_core::eval::search::SEARCH_TIE_TOL;
use pasql_core::eval::{
    brute_force_best, check_nonnegative_rewards, compute_eps_delta, cross_product_eval, mc_eval,
    rollout_actions, rollout_eval_deterministic, suboptimality_bound, IpmSpec,
};
use pasql_core::experiment::{
    run_seeds, summarize, sup_errors, theoretical_limit, TheoreticalLimit,
};
use pasql_core::model::io::{load_policy, policy_to_json};
use pasql_core::repro::{self, fmt_sig, TABLE_IDS};
use pasql_core::{Policy, QTable};
use serde_json::json;

use crate::args::{
    BoundArgs, EvalArgs, EvalMethod, Global, LearnArgs, LimitArgs, ReproArgs, SearchArgs,
};
use crate::setup::{self, usage, with_env, Env};

fn f9(x: f64) -> String {
    fmt_sig(x, 9)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn q_csv(q: &QTable) -> String {
    let mut out = String::from("phase,z,a,q\n");
    for l in 0..q.period() {
        for z in 0..q.n_z() {
            for a in 0..q.n_actions() {
                out.push_str(&format!("{l},{z},{a},{}\n", f9(q.get(l, z, a))));
            }
        }
    }
    out
}

fn print_q(q: &QTable) {
    for l in 0..q.period() {
        for z in 0..q.n_z() {
            let row: Vec<String> = q.row(l, z).iter().map(|&v| f9(v)).collect();
            println!("  Q^{l}(z={z}) = [{}]", row.join(", "));
        }
    }
}

fn report_json(report: &AssumptionReport) -> serde_json::Value {
    json!({
        "passes": report.passes(),
        "irreducible": report.irreducible(),
        "aperiodic": report.aperiodic(),
        "positive": report.positive(),
        "min_visit": report.min_visit,
        "failures": report.failures(),
        "phases": report.phases.iter().map(|p| json!({
            "phase": p.phase,
            "reachable": p.reachable,
            "closed_classes": p.closed_classes,
            "recurrent": p.recurrent.len(),
            "period": p.period,
        })).collect::<Vec<_>>(),
    })
}

pub fn learn(g: &Global, a: &LearnArgs) -> Result<()> {
    let ex = setup::experiment(a, g.seed_list.as_deref(), g.unchecked)?;
    let traces = with_env!(&ex.env, e => run_seeds(e, &ex.agent, &ex.mu, &ex.cfg, &ex.seeds))?;
    for (seed, trace) in ex.seeds.iter().zip(&traces) {
        write(&g.out, &format!("learn_seed{seed}.csv"), &trace.to_csv(f9))?;
        let meta = serde_json::to_string_pretty(&trace.metadata)?;
        write(&g.out, &format!("learn_seed{seed}.json"), &(meta + "\n"))?;
        println!(
            "seed {seed}: final Q after {} steps",
            trace.metadata.config.total_steps
        );
        print_q(&trace.final_q);
        for w in &trace.metadata.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(())
}

fn limit_for(g: &Global, a: &LimitArgs) -> Result<(Env, TheoreticalLimit)> {
    let env = setup::load_env(&a.env)?;
    let agent = setup::load_agent_for(&a.env, &env)?;
    let mu = setup::behavior(&a.behavior, &agent, a.period)?;
    let limit = theoretical_limit(env.tabular()?, &agent, &mu, g.tol, g.unchecked)?;
    Ok((env, limit))
}

fn zeta_csv(limit_zeta: &pasql_core::chain::CyclicDistribution<f64>) -> String {
    let codec = limit_zeta.codec();
    let mut out = String::from("phase,s,y,z,a,prob\n");
    for l in 0..limit_zeta.period() {
        for (x, &p) in limit_zeta.phase(l).iter().enumerate() {
            let (s, y, z, a) = codec.decode(x);
            out.push_str(&format!("{l},{s},{y},{z},{a},{}\n", fmt_sig(p, 12)));
        }
    }
    out
}

pub fn limit(g: &Global, a: &LimitArgs) -> Result<()> {
    let (env, lim) = limit_for(g, a)?;
    let model = env.tabular()?;
    let agent = setup::load_agent_for(&a.env, &env)?;
    let j = cross_product_eval(model, &agent, &lim.greedy)?;
    write(&g.out, "limit_q.csv", &q_csv(&lim.q))?;
    write(&g.out, "limit_zeta.csv", &zeta_csv(&lim.zeta))?;
    write(
        &g.out,
        "limit_policy.json",
        &(policy_to_json(&lim.greedy, Some("lowest index within 1e-9")) + "\n"),
    )?;
    let meta = json!({
        "behavior": a.behavior,
        "period": lim.q.period(),
        "greedy": lim.greedy.encoding(),
        "J": j,
        "assumption": report_json(&lim.report),
        "unvisited_z": lim.pmdp.unvisited(),
    });
    write(
        &g.out,
        "limit.json",
        &(serde_json::to_string_pretty(&meta)? + "\n"),
    )?;
    println!("Q_mu:");
    print_q(&lim.q);
    println!(
        "greedy policy {} with J = {}",
        lim.greedy.encoding().unwrap_or_default(),
        f9(j)
    );
    Ok(())
}

pub fn chain(g: &Global, a: &LimitArgs) -> Result<()> {
    let env = setup::load_env(&a.env)?;
    let agent = setup::load_agent_for(&a.env, &env)?;
    let mu = setup::behavior(&a.behavior, &agent, a.period)?;
    let jk = build_joint_kernel(env.tabular()?, &agent, &mu)?;
    let report = check_assumption2(&jk);
    write(
        &g.out,
        "chain.json",
        &(serde_json::to_string_pretty(&report_json(&report))? + "\n"),
    )?;
    for p in &report.phases {
        println!(
            "phase {}: {} reachable, {} closed class(es), {} recurrent, period {}",
            p.phase,
            p.reachable,
            p.closed_classes,
            p.recurrent.len(),
            p.period
        );
    }
    if let Some(m) = report.min_visit {
        println!("min zeta(z, a) = {}", fmt_sig(m, 12));
    }
    if !report.passes() && !g.unchecked {
        anyhow::bail!("structural checks failed: {}", report.failures().join("; "));
    }
    let zeta = cyclic_stationary(&jk, g.unchecked)?;
    write(&g.out, "chain_zeta.csv", &zeta_csv(&zeta))?;
    println!(
        "cross-phase residual {:e}",
        zeta.cross_phase_residual(&jk.chain)
    );
    Ok(())
}

pub fn bound(g: &Global, a: &BoundArgs) -> Result<()> {
    let (env, lim) = limit_for(g, &a.limit)?;
    let model = env.tabular()?;
    check_nonnegative_rewards(model)?;
    let agent = setup::load_agent_for(&a.limit.env, &env)?;
    let ed = compute_eps_delta(
        model,
        &agent,
        &lim.pmdp,
        a.depth,
        IpmSpec::TotalVariation,
        a.node_cap,
    )?;
    let rep = suboptimality_bound(&ed, &lim.q, model.gamma, IpmSpec::TotalVariation)?;
    let mut csv = String::from("phase,eps,delta,span,bound\n");
    for l in 0..rep.eps.len() {
        csv.push_str(&format!(
            "{l},{},{},{},{}\n",
            f9(rep.eps[l]),
            f9(rep.delta[l]),
            f9(rep.span[l]),
            f9(rep.bound)
        ));
    }
    write(&g.out, "bound.csv", &csv)?;
    println!(
        "history depth {} ({} nodes); eps and delta are truncated-sup lower estimates",
        rep.depth, ed.nodes
    );
    print!("{csv}");
    println!("bound = {}", f9(rep.bound));
    Ok(())
}

fn eval_policy(g: &Global, a: &EvalArgs, env: &Env, pi: &Policy) -> Result<(f64, Option<f64>)> {
    let agent = setup::load_agent_for(&a.env, env)?;
    let method = match a.method {
        EvalMethod::Auto if matches!(env, Env::Tabular(_)) => EvalMethod::Exact,
        EvalMethod::Auto if env.is_deterministic() && pi.is_deterministic() => EvalMethod::Rollout,
        EvalMethod::Auto => EvalMethod::Mc,
        m => m,
    };
    Ok(match method {
        EvalMethod::Exact => (cross_product_eval(env.tabular()?, &agent, pi)?, None),
        EvalMethod::Rollout => (
            with_env!(env, e => rollout_eval_deterministic(e, &agent, pi, a.tail_tol))?.value,
            None,
        ),
        _ => {
            let seed = g
                .seed_list
                .as_ref()
                .and_then(|s| s.first().copied())
                .unwrap_or(0);
            let est =
                with_env!(env, e => mc_eval(e, &agent, pi, None, a.tail_tol, a.rollouts, seed))?;
            (est.mean, Some(est.stderr))
        }
    })
}

pub fn eval(g: &Global, a: &EvalArgs) -> Result<()> {
    let env = setup::load_env(&a.env)?;
    let agent = setup::load_agent_for(&a.env, &env)?;
    let pi = match (&a.policy, &a.actions) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(usage!("file not found: {}", path.display()));
            }
            load_policy(path)?
        }
        (None, Some(digits)) => {
            setup::parse_actions(digits, agent.n_z(), agent.n_actions(), a.period)?
        }
        (None, None) => return Err(usage!("one of --policy or --actions is required")),
    };
    if pi.n_z() != agent.n_z() || pi.n_actions() != agent.n_actions() {
        return Err(usage!("policy shape does not match the agent machine"));
    }
    let (j, stderr) = eval_policy(g, a, &env, &pi)?;
    let label = pi.encoding().unwrap_or_else(|| "stochastic".into());
    write(
        &g.out,
        "eval.csv",
        &format!("policy,J\n{label},{}\n", f9(j)),
    )?;
    match stderr {
        Some(se) => println!("J = {} (stderr {})", f9(j), f9(se)),
        None => println!("J = {}", f9(j)),
    }
    Ok(())
}

pub fn search(g: &Global, a: &SearchArgs) -> Result<()> {
    if a.period == 0 {
        return Err(usage!("--L must be at least 1"));
    }
    let env = setup::load_env(&a.env)?;
    let agent = setup::load_agent_for(&a.env, &env)?;
    let (nz, na, l) = (agent.n_z(), agent.n_actions(), a.period);
    let best =
        match &env {
            Env::Tabular(model) => brute_force_best(nz, na, l, a.cap, |acts| {
                cross_product_eval(model, &agent, &Policy::deterministic(l, nz, na, acts)?)
            })?,
            _ if !env.is_deterministic() => return Err(usage!(
                "search on a stochastic simulator is not supported; fix --goal or use a model file"
            )),
            other => with_env!(other, e => brute_force_best(nz, na, l, a.cap, |acts| {
                Ok(rollout_actions(e, &agent, l, acts, a.tail_tol)?.value)
            }))?,
        };
    let enc = best.policy.encoding().unwrap_or_default();
    write(
        &g.out,
        &format!("search_L{l}.csv"),
        &format!("policy,J\n{enc},{}\n", f9(best.value)),
    )?;
    write(
        &g.out,
        &format!("search_L{l}_policy.json"),
        &(policy_to_json(&best.policy, Some("lexicographically smallest within 1e-9")) + "\n"),
    )?;
    println!(
        "J*_{l} = {} by {enc} ({} policies, ties within {SEARCH_TIE_TOL:e})",
        f9(best.value),
        best.evaluated
    );
    Ok(())
}

pub fn convergence(g: &Global, a: &LearnArgs) -> Result<()> {
    let ex = setup::experiment(a, g.seed_list.as_deref(), g.unchecked)?;
    let model = ex.env.tabular()?;
    let limit = theoretical_limit(model, &ex.agent, &ex.mu, g.tol, g.unchecked)?;
    let traces = run_seeds(model, &ex.agent, &ex.mu, &ex.cfg, &ex.seeds)?;
    let dir = g.out.join("convergence");
    for (seed, trace) in ex.seeds.iter().zip(&traces) {
        write(&dir, &format!("seed{seed}.csv"), &trace.to_csv(f9))?;
    }
    let mut summary = String::from("step,phase,z,a,median,q25,q75\n");
    for r in summarize(&traces)? {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step,
            r.phase,
            r.z,
            r.a,
            f9(r.median),
            f9(r.q25),
            f9(r.q75)
        ));
    }
    write(&dir, "summary.csv", &summary)?;
    write(&dir, "limit.csv", &q_csv(&limit.q))?;
    let errors = sup_errors(&traces, &limit.q);
    let meta = json!({
        "seeds": ex.seeds,
        "learner": traces[0].metadata,
        "limit_greedy": limit.greedy.encoding(),
        "sup_errors": errors,
        "assumption": report_json(&limit.report),
    });
    write(
        &dir,
        "convergence.json",
        &(serde_json::to_string_pretty(&meta)? + "\n"),
    )?;
    println!("limit Q_mu:");
    print_q(&limit.q);
    for (seed, e) in ex.seeds.iter().zip(&errors) {
        println!("seed {seed}: |Q - Q_mu|_inf = {}", f9(*e));
    }
    println!("median = {}", f9(pasql_core::experiment::median(&errors)));
    Ok(())
}

/// Returns whether every check passed.
pub fn repro_tables(g: &Global, a: &ReproArgs) -> Result<bool> {
    let ids: Vec<&str> = if a.tables.iter().any(|t| t == "all") {
        TABLE_IDS.to_vec()
    } else {
        for t in &a.tables {
            if !TABLE_IDS.contains(&t.as_str()) {
                return Err(usage!(
                    "unknown table '{t}'; expected one of {}",
                    TABLE_IDS.join(", ")
                ));
            }
        }
        a.tables.iter().map(String::as_str).collect()
    };
    let mut all = true;
    for id in ids {
        let table = repro::run(id)?;
        write(&g.out, &format!("repro_{id}.csv"), &table.to_csv())?;
        for c in &table.checks {
            let status = if c.passed() { "PASS" } else { "FAIL" };
            println!(
                "{status} {id} {}: computed {} expected {} (tol {:e})",
                c.name,
                f9(c.computed),
                f9(c.expected),
                c.tol
            );
        }
        all &= table.passed();
    }
    Ok(all)
}
