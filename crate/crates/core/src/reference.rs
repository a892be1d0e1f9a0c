//! Published reference values checked by `repro` and the acceptance suite.
//!
//! All values are rounded to three decimals at the source, hence the
//! `1e-3` tolerances.

/// Best deterministic period-`L` return for `L = 1..=10` on the counting
/// chain (`Z = Y`, `γ = 0.9`).
pub const INTRO_JSTAR: [f64; 10] = [
    4.022, 4.022, 7.479, 6.184, 8.810, 7.479, 9.340, 8.488, 9.607, 8.810,
];
pub const INTRO_JSTAR_TOL: f64 = 1e-3;
/// Truncation tolerance for the counting-chain rollouts.
pub const INTRO_TAIL_TOL: f64 = 1e-4;

/// Perturbation of the six-state benchmark used in the learning experiments.
pub const BENCH_P: f64 = 0.01;

/// Period 2 on the six-state benchmark: `J*_2`, then the greedy limits of `μ_1, μ_2, μ_3`.
pub const PERIODIC_JSTAR: f64 = 6.793;
pub const PERIODIC_LIMITS: [f64; 3] = [6.793, 1.064, 0.532];

/// Period 1 on the six-state benchmark: `J*_1`, then the greedy limits of `μ̄_1, μ̄_2, μ̄_3`.
pub const STATIONARY_JSTAR: f64 = 2.633;
pub const STATIONARY_LIMITS: [f64; 3] = [0.0, 1.064, 2.633];

pub const BENCH_TOL: f64 = 1e-3;

/// Two-state, period-2 chain with `P_0 = [[1/4, 3/4], [1/2, 1/2]]` and
/// `P_1 = [[3/4, 1/4], [1/4, 3/4]]`: kernels and exact cyclic limits as
/// `(numerator, denominator)`.
pub const TWO_STATE_P0: [[(i64, i64); 2]; 2] = [[(1, 4), (3, 4)], [(1, 2), (1, 2)]];
pub const TWO_STATE_P1: [[(i64, i64); 2]; 2] = [[(3, 4), (1, 4)], [(1, 4), (3, 4)]];
pub const TWO_STATE_ZETA: [[(i64, i64); 2]; 2] = [[(4, 9), (5, 9)], [(7, 18), (11, 18)]];
pub const TWO_STATE_TOL: f64 = 1e-10;

/// Maximiser of `J(π_p)` on the three-state single-observation model.
pub const STOCHASTIC_P_STAR: f64 = 0.39;
pub const STOCHASTIC_P_TOL: f64 = 0.02;
pub const STOCHASTIC_GRID_STEP: f64 = 0.01;
/// `J(π_1)`: reward `-0.5` forever at `γ = 0.9`.
pub const STOCHASTIC_J_AT_ONE: f64 = -5.0;

/// T-maze corridor half-lengths checked; the upper goal is entered at state
/// index `3n + 3` and the lower one at `3n + 4`.
pub const MAZE_SIZES: [u32; 5] = [1, 2, 3, 4, 5];
pub const MAZE_UPPER_OFFSET: u64 = 3;
pub const MAZE_LOWER_OFFSET: u64 = 4;
