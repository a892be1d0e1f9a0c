//! Joint Markov chain of `(S, Y, Z, A)` under a periodic behaviour policy.
//!
//! Phase `ℓ` kernels, their `L`-step products, the time-homogeneous
//! augmented chain, structural checks and cyclic stationary distributions.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{AgentStateMachine, PeriodicPolicy, TabularPomdp};
use crate::scalar::Scalar;

/// Row-sum tolerance for chain kernels.
pub const ROW_TOL: f64 = 1e-10;
/// Threshold below which `ζ^ℓ(z, a)` counts as unvisited.
pub const TOL_POS: f64 = 1e-12;

/// Bijection `(s, y, z, a) ↔ ((s * nY + y) * nZ + z) * nA + a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JointCodec {
    pub n_s: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub n_a: usize,
}

impl JointCodec {
    /// Codec for a bare chain on `n` states (all other factors trivial).
    pub fn plain(n: usize) -> Self {
        Self {
            n_s: n,
            n_y: 1,
            n_z: 1,
            n_a: 1,
        }
    }

    pub fn size(&self) -> usize {
        self.n_s * self.n_y * self.n_z * self.n_a
    }

    #[inline]
    pub fn encode(&self, s: usize, y: usize, z: usize, a: usize) -> usize {
        ((s * self.n_y + y) * self.n_z + z) * self.n_a + a
    }

    #[inline]
    pub fn decode(&self, x: usize) -> (usize, usize, usize, usize) {
        let a = x % self.n_a;
        let rest = x / self.n_a;
        let z = rest % self.n_z;
        let rest = rest / self.n_z;
        (rest / self.n_y, rest % self.n_y, z, a)
    }
}

/// Time-periodic chain: `kernels[ℓ]` moves the state from a phase-`ℓ`
/// epoch to the next one. `initial` is the law at the first (phase-0)
/// epoch; `None` means every state is a possible start.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicChain<T> {
    kernels: Vec<Matrix<T>>,
    initial: Option<Vec<T>>,
}

impl<T: Scalar> PeriodicChain<T> {
    pub fn new(kernels: Vec<Matrix<T>>, initial: Option<Vec<T>>) -> Result<Self> {
        let n = kernels
            .first()
            .map(Matrix::rows)
            .ok_or_else(|| Error::InvalidArgument("no kernels".into()))?;
        for (l, k) in kernels.iter().enumerate() {
            if k.rows() != n || k.cols() != n {
                return Err(Error::Dimension(format!(
                    "kernel {l} is {}x{}, expected {n}x{n}",
                    k.rows(),
                    k.cols()
                )));
            }
            for (i, sum) in k.row_sums().into_iter().enumerate() {
                if (sum.as_f64() - 1.0).abs() > ROW_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "kernel {l} row {i} sums to {}",
                        sum.as_f64()
                    )));
                }
            }
        }
        if let Some(init) = &initial {
            if init.len() != n {
                return Err(Error::Dimension(format!(
                    "initial law has {} entries, expected {n}",
                    init.len()
                )));
            }
        }
        Ok(Self { kernels, initial })
    }

    pub fn period(&self) -> usize {
        self.kernels.len()
    }

    pub fn size(&self) -> usize {
        self.kernels[0].rows()
    }

    pub fn kernel(&self, phase: usize) -> &Matrix<T> {
        &self.kernels[phase]
    }

    pub fn kernels(&self) -> &[Matrix<T>] {
        &self.kernels
    }

    pub fn initial(&self) -> Option<&[T]> {
        self.initial.as_deref()
    }
}

/// Joint chain of `(S_t, Y_t, Z_t, A_t)` together with its index codec.
#[derive(Clone, Debug, PartialEq)]
pub struct JointKernel<T> {
    pub chain: PeriodicChain<T>,
    pub codec: JointCodec,
}

impl<T: Scalar> JointKernel<T> {
    /// A bare periodic chain viewed as a joint chain with trivial `Y, Z, A`.
    pub fn from_chain(chain: PeriodicChain<T>) -> Self {
        let codec = JointCodec::plain(chain.size());
        Self { chain, codec }
    }

    pub fn period(&self) -> usize {
        self.chain.period()
    }
}

/// Builds `P_ℓ((s,y,z,a) → (s',y',z',a')) = P(s',y'|s,a) 1{z' = φ(z,y',a)} μ^{ℓ+1}(a'|z')`
/// and the initial law `ρ(s) P(y_1|s) 1{z = φ(z0, y_1, a0)} μ^0(a|z)`.
pub fn build_joint_kernel<T: Scalar>(
    model: &TabularPomdp<T>,
    agent: &AgentStateMachine,
    mu: &PeriodicPolicy<T>,
) -> Result<JointKernel<T>> {
    model.ensure_valid()?;
    check_dims(model, agent, mu)?;
    let codec = JointCodec {
        n_s: model.n_states,
        n_y: model.n_obs,
        n_z: agent.n_z(),
        n_a: model.n_actions,
    };
    let n = codec.size();
    let period = mu.period();
    let mut kernels = Vec::with_capacity(period);
    for l in 0..period {
        let next = (l + 1) % period;
        let mut k = Matrix::zeros(n, n);
        for x in 0..n {
            let (s, _, z, a) = codec.decode(x);
            let row = k.row_mut(x);
            for t in model.transitions(s, a) {
                let z2 = agent.update(z, t.obs, a);
                for (a2, &p) in mu.dist(next, z2).iter().enumerate() {
                    if p != T::zero() {
                        let j = codec.encode(t.next_state, t.obs, z2, a2);
                        row[j] = row[j] + t.prob * p;
                    }
                }
            }
        }
        kernels.push(k);
    }

    let mut initial = vec![T::zero(); n];
    for (s, &ps) in model.rho.iter().enumerate() {
        if ps == T::zero() {
            continue;
        }
        for (y, py) in model
            .initial_obs_dist(s, agent.a0())
            .into_iter()
            .enumerate()
        {
            if py == T::zero() {
                continue;
            }
            let z = agent.initial(y);
            for (a, &pa) in mu.dist(0, z).iter().enumerate() {
                let x = codec.encode(s, y, z, a);
                initial[x] = initial[x] + ps * py * pa;
            }
        }
    }
    Ok(JointKernel {
        chain: PeriodicChain::new(kernels, Some(initial))?,
        codec,
    })
}

pub(crate) fn check_dims<T: Scalar>(
    model: &TabularPomdp<T>,
    agent: &AgentStateMachine,
    policy: &PeriodicPolicy<T>,
) -> Result<()> {
    if agent.n_obs() != model.n_obs || agent.n_actions() != model.n_actions {
        return Err(Error::Dimension(format!(
            "agent machine is for nY={}, nA={} but the model has nY={}, nA={}",
            agent.n_obs(),
            agent.n_actions(),
            model.n_obs,
            model.n_actions
        )));
    }
    if policy.n_z() != agent.n_z() || policy.n_actions() != model.n_actions {
        return Err(Error::Dimension(format!(
            "policy is over nZ={}, nA={} but the agent has nZ={} and the model nA={}",
            policy.n_z(),
            policy.n_actions(),
            agent.n_z(),
            model.n_actions
        )));
    }
    Ok(())
}

/// `𝒫_ℓ = P_ℓ P_{ℓ+1} ⋯ P_{ℓ+L-1}` (indices mod `L`).
pub fn l_step_kernels<T: Scalar>(chain: &PeriodicChain<T>) -> Vec<Matrix<T>> {
    let period = chain.period();
    (0..period)
        .map(|l| {
            (1..period).fold(chain.kernel(l).clone(), |acc, k| {
                acc.matmul(chain.kernel((l + k) % period))
            })
        })
        .collect()
}

/// Time-homogeneous chain on `(ℓ, x)` with index `ℓ * N + x`; block
/// `(ℓ, ℓ+1)` is `P_ℓ` and every other block is zero.
pub fn augmented_chain<T: Scalar>(chain: &PeriodicChain<T>) -> Matrix<T> {
    let (period, n) = (chain.period(), chain.size());
    let mut out = Matrix::zeros(period * n, period * n);
    for l in 0..period {
        let next = (l + 1) % period;
        let k = chain.kernel(l);
        for i in 0..n {
            for j in 0..n {
                out[(l * n + i, next * n + j)] = k[(i, j)];
            }
        }
    }
    out
}

/// States that can be occupied at an epoch of each phase, starting from the
/// support of the initial law at phase 0.
pub fn reachable_by_phase<T: Scalar>(chain: &PeriodicChain<T>) -> Vec<Vec<bool>> {
    let (period, n) = (chain.period(), chain.size());
    let mut seen = vec![vec![false; n]; period];
    let mut queue = VecDeque::new();
    for x in 0..n {
        if chain.initial().is_none_or(|init| init[x] != T::zero()) {
            seen[0][x] = true;
            queue.push_back((0, x));
        }
    }
    while let Some((l, x)) = queue.pop_front() {
        let next = (l + 1) % period;
        for (j, &p) in chain.kernel(l).row(x).iter().enumerate() {
            if p != T::zero() && !seen[next][j] {
                seen[next][j] = true;
                queue.push_back((next, j));
            }
        }
    }
    seen
}

/// Structure of `𝒫_ℓ` restricted to the states reachable at phase `ℓ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseStructure {
    pub phase: usize,
    pub reachable: usize,
    /// Number of closed communicating classes; exactly one means the
    /// reachable chain is irreducible up to transient states.
    pub closed_classes: usize,
    /// States of the closed class (when unique), ascending.
    pub recurrent: Vec<usize>,
    /// Period of the closed class; `1` is aperiodic.
    pub period: usize,
}

impl PhaseStructure {
    pub fn irreducible(&self) -> bool {
        self.closed_classes == 1
    }

    pub fn aperiodic(&self) -> bool {
        self.irreducible() && self.period == 1
    }
}

/// Outcome of the structural and positivity checks behind PASQL convergence.
#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub phases: Vec<PhaseStructure>,
    /// `(ℓ, z, a)` with `ζ^ℓ(z, a) ≤ TOL_POS`; empty when positivity holds.
    pub unvisited: Vec<(usize, usize, usize)>,
    /// Smallest `ζ^ℓ(z, a)`; `None` when the distribution could not be computed.
    pub min_visit: Option<f64>,
}

impl AssumptionReport {
    pub fn irreducible(&self) -> bool {
        self.phases.iter().all(PhaseStructure::irreducible)
    }

    pub fn aperiodic(&self) -> bool {
        self.phases.iter().all(PhaseStructure::aperiodic)
    }

    pub fn positive(&self) -> bool {
        self.min_visit.is_some() && self.unvisited.is_empty()
    }

    pub fn passes(&self) -> bool {
        self.irreducible() && self.aperiodic() && self.positive()
    }

    /// Human-readable list of failures, empty when the report passes.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.phases {
            if !p.irreducible() {
                out.push(format!(
                    "phase {}: {} closed classes",
                    p.phase, p.closed_classes
                ));
            } else if !p.aperiodic() {
                out.push(format!(
                    "phase {}: periodic with period {}",
                    p.phase, p.period
                ));
            }
        }
        if self.min_visit.is_some() {
            for &(l, z, a) in &self.unvisited {
                out.push(format!("zeta^{l}(z={z}, a={a}) is zero"));
            }
        }
        out
    }
}

/// Per-phase structure of the `L`-step kernels.
pub fn phase_structure<T: Scalar>(chain: &PeriodicChain<T>) -> Vec<PhaseStructure> {
    let reach = reachable_by_phase(chain);
    l_step_kernels(chain)
        .iter()
        .enumerate()
        .map(|(l, k)| analyse(l, k, &reach[l]))
        .collect()
}

fn analyse<T: Scalar>(phase: usize, kernel: &Matrix<T>, reach: &[bool]) -> PhaseStructure {
    let nodes: Vec<usize> = (0..reach.len()).filter(|&x| reach[x]).collect();
    let local: Vec<Option<usize>> = {
        let mut v = vec![None; reach.len()];
        for (i, &x) in nodes.iter().enumerate() {
            v[x] = Some(i);
        }
        v
    };
    let adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&x| {
            kernel
                .row(x)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p != T::zero())
                .filter_map(|(j, _)| local[j])
                .collect()
        })
        .collect();
    let comp = tarjan(&adj);
    let n_comp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut closed = vec![true; n_comp];
    for (u, succ) in adj.iter().enumerate() {
        if succ.iter().any(|&v| comp[v] != comp[u]) {
            closed[comp[u]] = false;
        }
    }
    let closed_ids: Vec<usize> = (0..n_comp).filter(|&c| closed[c]).collect();
    let (recurrent, period) = if closed_ids.len() == 1 {
        let members: Vec<usize> = (0..nodes.len())
            .filter(|&u| comp[u] == closed_ids[0])
            .collect();
        let period = class_period(&adj, &members);
        (members.iter().map(|&u| nodes[u]).collect(), period)
    } else {
        (Vec::new(), 0)
    };
    PhaseStructure {
        phase,
        reachable: nodes.len(),
        closed_classes: closed_ids.len(),
        recurrent,
        period,
    }
}

/// Strongly connected components (iterative Tarjan); returns a component id per node.
fn tarjan(adj: &[Vec<usize>]) -> Vec<usize> {
    const UNSET: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSET; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSET; n];
    let mut stack = Vec::new();
    let (mut next_index, mut next_comp) = (0, 0);
    for root in 0..n {
        if index[root] != UNSET {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(top) = call.last_mut() {
            let u = top.0;
            if let Some(&v) = adj[u].get(top.1) {
                top.1 += 1;
                if index[v] == UNSET {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[u]);
            }
            if low[u] == index[u] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == u {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

/// gcd of `level(u) + 1 - level(v)` over the edges of a strongly connected class.
fn class_period(adj: &[Vec<usize>], members: &[usize]) -> usize {
    let mut level = vec![usize::MAX; adj.len()];
    let mut in_class = vec![false; adj.len()];
    for &u in members {
        in_class[u] = true;
    }
    level[members[0]] = 0;
    let mut queue = VecDeque::from([members[0]]);
    let mut g = 0usize;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !in_class[v] {
                continue;
            }
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            } else {
                g = gcd(g, level[u] + 1 - level[v]);
            }
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Per-phase limiting laws `ζ^ℓ` over the joint index space.
#[derive(Clone, Debug, PartialEq)]
pub struct CyclicDistribution<T> {
    zeta: Vec<Vec<T>>,
    codec: JointCodec,
}

impl<T: Scalar> CyclicDistribution<T> {
    pub fn new(zeta: Vec<Vec<T>>, codec: JointCodec) -> Result<Self> {
        if zeta.is_empty() || zeta.iter().any(|z| z.len() != codec.size()) {
            return Err(Error::Dimension(
                "zeta does not match the joint codec".into(),
            ));
        }
        Ok(Self { zeta, codec })
    }

    pub fn period(&self) -> usize {
        self.zeta.len()
    }

    pub fn codec(&self) -> JointCodec {
        self.codec
    }

    pub fn phase(&self, l: usize) -> &[T] {
        &self.zeta[l]
    }

    fn marginal(
        &self,
        l: usize,
        size: usize,
        key: impl Fn(usize, usize, usize, usize) -> usize,
    ) -> Vec<T> {
        let mut out = vec![T::zero(); size];
        for (x, &p) in self.zeta[l].iter().enumerate() {
            let (s, y, z, a) = self.codec.decode(x);
            let k = key(s, y, z, a);
            out[k] = out[k] + p;
        }
        out
    }

    /// `ζ^ℓ(s, z)` at index `s * nZ + z`.
    pub fn marginal_sz(&self, l: usize) -> Vec<T> {
        let nz = self.codec.n_z;
        self.marginal(l, self.codec.n_s * nz, |s, _, z, _| s * nz + z)
    }

    /// `ζ^ℓ(z, a)` at index `z * nA + a`.
    pub fn marginal_za(&self, l: usize) -> Vec<T> {
        let na = self.codec.n_a;
        self.marginal(l, self.codec.n_z * na, |_, _, z, a| z * na + a)
    }

    pub fn marginal_z(&self, l: usize) -> Vec<T> {
        self.marginal(l, self.codec.n_z, |_, _, z, _| z)
    }

    pub fn marginal_s(&self, l: usize) -> Vec<T> {
        self.marginal(l, self.codec.n_s, |s, _, _, _| s)
    }

    /// `ζ^ℓ(s | z)`, which also equals `ζ^ℓ(s | z, a)`; `None` when `ζ^ℓ(z) = 0`.
    pub fn cond_s_given_z(&self, l: usize, z: usize) -> Option<Vec<T>> {
        let nz = self.codec.n_z;
        let sz = self.marginal_sz(l);
        let col: Vec<T> = (0..self.codec.n_s).map(|s| sz[s * nz + z]).collect();
        let total: T = col.iter().copied().sum();
        if total == T::zero() {
            return None;
        }
        Some(col.into_iter().map(|p| p / total).collect())
    }

    /// `max_ℓ ‖ζ^ℓ 𝒫_ℓ − ζ^ℓ‖₁`.
    pub fn l_step_residual(&self, chain: &PeriodicChain<T>) -> f64 {
        l_step_kernels(chain)
            .iter()
            .zip(&self.zeta)
            .map(|(k, z)| crate::scalar::l1_distance(&k.left_mul(z), z).as_f64())
            .fold(0.0, f64::max)
    }

    /// `max_ℓ ‖ζ^ℓ P_ℓ − ζ^{ℓ+1}‖₁`.
    pub fn cross_phase_residual(&self, chain: &PeriodicChain<T>) -> f64 {
        let period = self.period();
        (0..period)
            .map(|l| {
                let pushed = chain.kernel(l).left_mul(&self.zeta[l]);
                crate::scalar::l1_distance(&pushed, &self.zeta[(l + 1) % period]).as_f64()
            })
            .fold(0.0, f64::max)
    }
}

/// Structure plus `ζ^ℓ(z, a)` positivity.
pub fn check_assumption2<T: Scalar>(jk: &JointKernel<T>) -> AssumptionReport {
    let phases = phase_structure(&jk.chain);
    let mut report = AssumptionReport {
        phases,
        unvisited: Vec::new(),
        min_visit: None,
    };
    if !report.irreducible() {
        return report;
    }
    if let Ok(dist) = stationary_from_structure(jk, &report.phases) {
        let mut min = f64::INFINITY;
        for l in 0..dist.period() {
            for (i, p) in dist.marginal_za(l).into_iter().enumerate() {
                let p = p.as_f64();
                min = min.min(p);
                if p <= TOL_POS {
                    report
                        .unvisited
                        .push((l, i / jk.codec.n_a, i % jk.codec.n_a));
                }
            }
        }
        report.min_visit = Some(min);
    }
    report
}

/// `ζ^ℓ` as the stationary law of `𝒫_ℓ` on its closed class (zero elsewhere).
///
/// Multiple closed classes are always an error since the limit would depend
/// on the start. A periodic class is an error unless `unchecked`, in which
/// case the stationary (Cesàro) law is returned.
pub fn cyclic_stationary<T: Scalar>(
    jk: &JointKernel<T>,
    unchecked: bool,
) -> Result<CyclicDistribution<T>> {
    let phases = phase_structure(&jk.chain);
    for p in &phases {
        if !p.irreducible() {
            return Err(Error::Assumption(format!(
                "phase {}: the reachable chain has {} closed classes",
                p.phase, p.closed_classes
            )));
        }
        if !p.aperiodic() && !unchecked {
            return Err(Error::Assumption(format!(
                "phase {}: L-step chain has period {}",
                p.phase, p.period
            )));
        }
    }
    stationary_from_structure(jk, &phases)
}

fn stationary_from_structure<T: Scalar>(
    jk: &JointKernel<T>,
    phases: &[PhaseStructure],
) -> Result<CyclicDistribution<T>> {
    let kernels = l_step_kernels(&jk.chain);
    let n = jk.chain.size();
    let zeta = kernels
        .iter()
        .zip(phases)
        .map(|(k, p)| {
            let local = k.restrict(&p.recurrent).stationary()?;
            let mut full = vec![T::zero(); n];
            for (&x, v) in p.recurrent.iter().zip(local) {
                full[x] = v;
            }
            Ok(full)
        })
        .collect::<Result<Vec<_>>>()?;
    CyclicDistribution::new(zeta, jk.codec)
}
