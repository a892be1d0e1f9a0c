//! Built-in example environments.
//!
//! * [`Example1`]: counting chain on the positive integers where the right
//!   action depends on membership in a sparse set of triangular offsets;
//!   only parity is observed.
//! * [`example2`]: three hidden states, a single observation; the best
//!   stationary policy is stochastic.
//! * [`Example3`]: T-maze with a corridor of length `2n`.
//! * [`fig4`]: six-state, two-observation benchmark `M(p)` used for the
//!   learning experiments, with self-loop perturbation `p`.

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::model::{GenerativePomdp, Labels, PeriodicPolicy, Step, TabularPomdp, Transition};
use crate::scalar::Scalar;

/// Counting chain: `s' = s + 1` with reward `+1` when the action matches the
/// state's class, otherwise reward `-1` and reset to `1`. Observation is the
/// parity of the state (`0` odd, `1` even). Starts in state `1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example1 {
    gamma: f64,
}

impl Default for Example1 {
    fn default() -> Self {
        Self { gamma: 0.9 }
    }
}

impl Example1 {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma = {gamma} must lie in [0, 1)"
            )));
        }
        Ok(Self { gamma })
    }

    /// `s ∈ {n(n+1)/2 + 1 : n ≥ 0}`, i.e. `8(s - 1) + 1` is a perfect square.
    pub fn in_d0(s: u64) -> bool {
        if s == 0 {
            return false;
        }
        let disc = 8 * (s as u128 - 1) + 1;
        let r = disc.isqrt();
        r * r == disc
    }

    /// Action that advances the chain from `s`.
    pub fn correct_action(s: u64) -> usize {
        if Self::in_d0(s) {
            0
        } else {
            1
        }
    }

    pub fn observation(s: u64) -> usize {
        if s % 2 == 1 {
            0
        } else {
            1
        }
    }

    pub fn transition(s: u64, a: usize) -> (u64, f64) {
        if a == Self::correct_action(s) {
            (s + 1, 1.0)
        } else {
            (1, -1.0)
        }
    }
}

impl GenerativePomdp for Example1 {
    type State = u64;

    fn n_actions(&self) -> usize {
        2
    }

    fn n_obs(&self) -> usize {
        2
    }

    fn gamma(&self) -> f64 {
        self.gamma
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn initial_state(&self, _rng: &mut dyn RngCore) -> u64 {
        1
    }

    fn initial_observation(&self, state: &u64, _a0: usize, _rng: &mut dyn RngCore) -> usize {
        Self::observation(*state)
    }

    fn step(&self, state: &u64, action: usize, _rng: &mut dyn RngCore) -> Step<u64> {
        let (next, reward) = Self::transition(*state, action);
        Step {
            state: next,
            obs: Self::observation(next),
            reward,
            terminal: false,
        }
    }
}

/// Three-state single-observation model. Action 0 leaves the end states in
/// place and splits state 1 evenly; action 1 drifts the end states towards
/// state 1 and keeps state 1 in place. Rewards `[-1, 0, 2]` under action 0
/// and `-0.5` everywhere under action 1. Starts in state 0.
pub fn example2<T: Scalar>() -> TabularPomdp<T> {
    let half = T::frac(1, 2);
    let one = T::one();
    let trans = vec![
        vec![Transition::new(0, 0, one)],
        vec![Transition::new(0, 0, half), Transition::new(1, 0, half)],
        vec![Transition::new(0, 0, half), Transition::new(2, 0, half)],
        vec![Transition::new(1, 0, one)],
        vec![Transition::new(2, 0, one)],
        vec![Transition::new(2, 0, half), Transition::new(1, 0, half)],
    ];
    let minus_half = -half;
    TabularPomdp {
        n_states: 3,
        n_actions: 2,
        n_obs: 1,
        trans,
        reward: vec![
            -one,
            minus_half,
            T::zero(),
            minus_half,
            T::frac(2, 1),
            minus_half,
        ],
        gamma: T::frac(9, 10),
        rho: vec![one, T::zero(), T::zero()],
        init_obs: Some(vec![one; 3]),
        labels: None,
    }
}

/// Observation of an `M(p)` state: `0` on `{0, 1, 2}`, `1` on `{3, 4, 5}`.
pub fn fig4_observation(s: usize) -> usize {
    usize::from(s >= 3)
}

/// Unperturbed `M(p)` state transitions `(s, a) -> [(s', numerator/2)]`.
const FIG4_EDGES: [[&[(usize, i64)]; 2]; 6] = [
    [&[(1, 2)], &[(2, 2)]],
    [&[(0, 1), (3, 1)], &[(0, 1), (3, 1)]],
    [&[(0, 1), (3, 1)], &[(0, 1), (3, 1)]],
    [&[(4, 2)], &[(5, 2)]],
    [&[(3, 1), (0, 1)], &[(3, 1), (0, 1)]],
    [&[(3, 1), (0, 1)], &[(3, 1), (0, 1)]],
];

/// `r(s, a)` of the unperturbed model, in halves.
const FIG4_REWARD_HALVES: [[i64; 2]; 6] = [[0, 1], [0, 0], [2, 0], [1, 0], [0, 2], [0, 0]];

/// The `M(p)` family: each action's state transition matrix becomes
/// `p I + (1 - p) P`, observations follow the landing state, `γ = 0.9` and
/// the system starts in state 0.
///
/// Rewards keep the base `r(s, a)`: a transition's reward is attached to the
/// state-action pair, so the self-loop mass added by `p` carries it as well.
pub fn fig4<T: Scalar>(p: T) -> Result<TabularPomdp<T>> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "perturbation p = {:?} must lie in [0, 1]",
            p
        )));
    }
    let mut trans = Vec::with_capacity(12);
    let mut reward = Vec::with_capacity(12);
    for (s, edges) in FIG4_EDGES.iter().enumerate() {
        for (a, row) in edges.iter().enumerate() {
            let mut dist = [T::zero(); 6];
            dist[s] = p;
            for &(next, halves) in row.iter() {
                dist[next] = dist[next] + (T::one() - p) * T::frac(halves, 2);
            }
            trans.push(
                dist.iter()
                    .enumerate()
                    .filter(|(_, &q)| q != T::zero())
                    .map(|(next, &q)| Transition::new(next, fig4_observation(next), q))
                    .collect(),
            );
            reward.push(T::frac(FIG4_REWARD_HALVES[s][a], 2));
        }
    }
    let mut init_obs = vec![T::zero(); 12];
    for s in 0..6 {
        init_obs[s * 2 + fig4_observation(s)] = T::one();
    }
    let mut rho = vec![T::zero(); 6];
    rho[0] = T::one();
    Ok(TabularPomdp {
        n_states: 6,
        n_actions: 2,
        n_obs: 2,
        trans,
        reward,
        gamma: T::frac(9, 10),
        rho,
        init_obs: Some(init_obs),
        labels: Some(Labels {
            states: (0..6).map(|s| s.to_string()).collect(),
            actions: vec!["0".into(), "1".into()],
            observations: vec!["white".into(), "gray".into()],
        }),
    })
}

/// Behaviour policy from an `nZ × L` table of action-0 probabilities,
/// `table[z][ℓ] = μ^ℓ(0 | z)`, for two-action models.
pub fn behavior_from_action0<T: Scalar>(table: &[Vec<T>]) -> Result<PeriodicPolicy<T>> {
    let n_z = table.len();
    let period = table.first().map_or(0, Vec::len);
    let mut probs = Vec::with_capacity(period * n_z * 2);
    for l in 0..period {
        for row in table {
            let p0 = *row
                .get(l)
                .ok_or_else(|| Error::Dimension("ragged behaviour table".into()))?;
            probs.push(p0);
            probs.push(T::one() - p0);
        }
    }
    PeriodicPolicy::new(period, n_z, 2, probs)
}

/// The three period-2 behaviour policies `μ_1, μ_2, μ_3` for `M(p)` with `Z = Y`.
pub fn fig4_behavior<T: Scalar>(k: usize) -> Result<PeriodicPolicy<T>> {
    let (lo, mid, hi) = (T::frac(1, 5), T::frac(1, 2), T::frac(4, 5));
    let table = match k {
        1 => vec![vec![lo, hi], vec![hi, lo]],
        2 => vec![vec![mid, mid], vec![mid, mid]],
        3 => vec![vec![hi, lo], vec![lo, hi]],
        _ => {
            return Err(Error::InvalidArgument(format!(
                "behaviour index {k} not in 1..=3"
            )))
        }
    };
    behavior_from_action0(&table)
}

/// The three stationary behaviour policies `μ̄_1, μ̄_2, μ̄_3`.
pub fn fig4_stationary_behavior<T: Scalar>(k: usize) -> Result<PeriodicPolicy<T>> {
    let table = match k {
        1 => vec![vec![T::frac(1, 5)], vec![T::frac(4, 5)]],
        2 => vec![vec![T::frac(1, 2)], vec![T::frac(1, 2)]],
        3 => vec![vec![T::frac(4, 5)], vec![T::frac(1, 5)]],
        _ => {
            return Err(Error::InvalidArgument(format!(
                "behaviour index {k} not in 1..=3"
            )))
        }
    };
    behavior_from_action0(&table)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Goal {
    /// Reached by `UP` at the junction.
    Upper,
    /// Reached by `DOWN` at the junction.
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Position {
    Start,
    Corridor(u32),
    Junction,
    /// Absorbing cell after a goal has been entered.
    Finished,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MazeState {
    pub position: Position,
    pub goal: Goal,
}

/// T-maze: start cell revealing the goal, an unlabelled corridor of `2n`
/// cells, and a junction where `UP`/`DOWN` enter the goals for `±1`.
///
/// Actions are `LEFT, RIGHT, STAY, UP, DOWN`. An action that is not
/// available at the current position leaves the state unchanged with zero
/// reward. Episodic with `γ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Example3 {
    n: u32,
    goal: Option<Goal>,
}

impl Example3 {
    pub const LEFT: usize = 0;
    pub const RIGHT: usize = 1;
    pub const STAY: usize = 2;
    pub const UP: usize = 3;
    pub const DOWN: usize = 4;

    /// Goal drawn uniformly at the start of each episode.
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument(
                "corridor half-length must be at least 1".into(),
            ));
        }
        Ok(Self { n, goal: None })
    }

    pub fn with_goal(mut self, goal: Goal) -> Self {
        self.goal = Some(goal);
        self
    }

    pub fn corridor_len(&self) -> u32 {
        2 * self.n
    }

    pub fn observation(state: &MazeState) -> usize {
        match state.position {
            Position::Start => match state.goal {
                Goal::Upper => 1,
                Goal::Lower => 2,
            },
            Position::Corridor(_) | Position::Finished => 0,
            Position::Junction => 3,
        }
    }

    /// Period-3 policy over `Z = Y`: walk two cells every three steps so the
    /// junction is reached in a phase that encodes the goal.
    pub fn reference_policy() -> PeriodicPolicy<f64> {
        let (r, s, u, d) = (Self::RIGHT, Self::STAY, Self::UP, Self::DOWN);
        #[rustfmt::skip]
        let actions = [
            r, r, s, s,
            r, s, r, u,
            s, s, s, d,
        ];
        PeriodicPolicy::deterministic(3, 4, 5, &actions).expect("well-formed")
    }
}

impl GenerativePomdp for Example3 {
    type State = MazeState;

    fn n_actions(&self) -> usize {
        5
    }

    fn n_obs(&self) -> usize {
        4
    }

    fn gamma(&self) -> f64 {
        1.0
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn is_deterministic(&self) -> bool {
        self.goal.is_some()
    }

    fn is_episodic(&self) -> bool {
        true
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> MazeState {
        let goal = self.goal.unwrap_or_else(|| {
            if rng.gen::<bool>() {
                Goal::Upper
            } else {
                Goal::Lower
            }
        });
        MazeState {
            position: Position::Start,
            goal,
        }
    }

    fn initial_observation(&self, state: &MazeState, _a0: usize, _rng: &mut dyn RngCore) -> usize {
        Self::observation(state)
    }

    fn step(&self, state: &MazeState, action: usize, _rng: &mut dyn RngCore) -> Step<MazeState> {
        let last = self.corridor_len();
        let stay = |s: MazeState| Step {
            state: s,
            obs: Self::observation(&s),
            reward: 0.0,
            terminal: false,
        };
        let goto = |p: Position| {
            let s = MazeState {
                position: p,
                goal: state.goal,
            };
            Step {
                state: s,
                obs: Self::observation(&s),
                reward: 0.0,
                terminal: false,
            }
        };
        match (state.position, action) {
            (Position::Finished, _) => Step {
                terminal: true,
                ..stay(*state)
            },
            (Position::Start, Self::RIGHT) => goto(Position::Corridor(1)),
            (Position::Corridor(i), Self::LEFT) => goto(if i == 1 {
                Position::Start
            } else {
                Position::Corridor(i - 1)
            }),
            (Position::Corridor(i), Self::RIGHT) => goto(if i == last {
                Position::Junction
            } else {
                Position::Corridor(i + 1)
            }),
            (Position::Junction, Self::LEFT) => goto(Position::Corridor(last)),
            (Position::Junction, Self::UP | Self::DOWN) => {
                let entered = if action == Self::UP {
                    Goal::Upper
                } else {
                    Goal::Lower
                };
                let s = MazeState {
                    position: Position::Finished,
                    goal: state.goal,
                };
                Step {
                    state: s,
                    obs: Self::observation(&s),
                    reward: if entered == state.goal { 1.0 } else { -1.0 },
                    terminal: true,
                }
            }
            _ => stay(*state),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn example1_steps() {
        let env = Example1::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            env.step(&1, 0, &mut rng),
            Step {
                state: 2,
                obs: 1,
                reward: 1.0,
                terminal: false
            }
        );
        assert_eq!(
            env.step(&2, 0, &mut rng),
            Step {
                state: 3,
                obs: 0,
                reward: 1.0,
                terminal: false
            }
        );
        assert_eq!(
            env.step(&3, 0, &mut rng),
            Step {
                state: 1,
                obs: 0,
                reward: -1.0,
                terminal: false
            }
        );
        assert_eq!(
            env.step(&3, 1, &mut rng),
            Step {
                state: 4,
                obs: 1,
                reward: 1.0,
                terminal: false
            }
        );
        assert_eq!(Example1::observation(3), 0);
    }

    #[test]
    fn example1_membership_matches_triangular_numbers() {
        let mut next_tri = 1u64;
        let mut n = 0u64;
        for s in 1..=1_000_000u64 {
            let expected = s == next_tri;
            if expected {
                n += 1;
                next_tri += n;
            }
            assert_eq!(Example1::in_d0(s), expected, "s = {s}");
        }
        let n = 1_000_000_000u64;
        assert!(Example1::in_d0(n * (n + 1) / 2 + 1));
        assert!(!Example1::in_d0(n * (n + 1) / 2 + 2));
    }

    #[test]
    fn example2_shape() {
        let m = example2::<f64>();
        assert!(m.validate().is_empty());
        for s in 0..3 {
            assert_eq!(m.reward(s, 1), -0.5);
        }
        assert_eq!(m.state_marginal(1, 0), vec![0.5, 0.0, 0.5]);
        assert_eq!(m.n_obs, 1);
    }

    #[test]
    fn fig4_edges() {
        let m = fig4(0.0).unwrap();
        assert!(m.validate().is_empty());
        assert_eq!(m.state_marginal(0, 0), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.reward(0, 0), 0.0);
        assert_eq!(m.state_marginal(4, 1), vec![0.5, 0.0, 0.0, 0.5, 0.0, 0.0]);
        assert_eq!(m.reward(4, 1), 1.0);

        let m = fig4(0.01).unwrap();
        assert!(m.validate().is_empty());
        assert_eq!(m.state_marginal(0, 0), vec![0.01, 0.99, 0.0, 0.0, 0.0, 0.0]);
        assert!(fig4(1.5).is_err());
        assert!(fig4(-0.1).is_err());
    }

    #[test]
    fn fig4_perturbation_rows() {
        let base = fig4(0.0).unwrap();
        for &p in &[0.0, 0.01, 0.3, 1.0] {
            let m = fig4(p).unwrap();
            for s in 0..6 {
                for a in 0..2 {
                    let got = m.state_marginal(s, a);
                    let want: Vec<f64> = base
                        .state_marginal(s, a)
                        .iter()
                        .enumerate()
                        .map(|(j, &q)| if j == s { p } else { 0.0 } + (1.0 - p) * q)
                        .collect();
                    for (g, w) in got.iter().zip(&want) {
                        assert!((g - w).abs() < 1e-15);
                    }
                    for t in m.transitions(s, a) {
                        assert_eq!(t.obs, fig4_observation(t.next_state));
                    }
                }
            }
        }
    }

    #[test]
    fn behaviour_tables() {
        let mu1 = fig4_behavior::<f64>(1).unwrap();
        assert_eq!(mu1.prob(0, 0, 0), 0.2);
        assert_eq!(mu1.prob(1, 0, 0), 0.8);
        assert_eq!(mu1.prob(0, 1, 0), 0.8);
        assert_eq!(mu1.prob(1, 1, 1), 0.8);
        assert!(fig4_behavior::<f64>(4).is_err());
        assert_eq!(
            fig4_stationary_behavior::<f64>(3).unwrap().prob(0, 0, 0),
            0.8
        );
    }

    #[test]
    fn maze_observations_and_goals() {
        let env = Example3::new(2).unwrap().with_goal(Goal::Lower);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s0 = env.initial_state(&mut rng);
        assert_eq!(Example3::observation(&s0), 2);
        let s1 = env.step(&s0, Example3::RIGHT, &mut rng);
        assert_eq!(s1.obs, 0);
        let j = MazeState {
            position: Position::Junction,
            goal: Goal::Lower,
        };
        assert_eq!(Example3::observation(&j), 3);
        let wrong = env.step(&j, Example3::UP, &mut rng);
        assert_eq!((wrong.reward, wrong.terminal), (-1.0, true));
        let right = env.step(&j, Example3::DOWN, &mut rng);
        assert_eq!((right.reward, right.terminal), (1.0, true));
        let noop = env.step(&j, Example3::STAY, &mut rng);
        assert_eq!((noop.state, noop.reward), (j, 0.0));
    }
}
