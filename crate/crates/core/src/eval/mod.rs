//! Policy evaluation, exhaustive search and the sub-optimality bound.

pub mod bound;
mod crossprod;
mod rollout;
pub mod search;

pub use bound::{
    check_nonnegative_rewards, compute_eps_delta, history_optimal_value, suboptimality_bound,
    BoundReport, EpsDelta, IpmSpec,
};
pub use crossprod::{
    cross_product_eval, eval_stochastic_stationary, initial_sz_law, CrossProductChain,
};
pub use rollout::{
    horizon_for, mc_eval, rollout_actions, rollout_eval_deterministic, McEstimate, RolloutOutcome,
    EPISODE_STEP_CAP,
};
pub use search::{brute_force_best, enumerate_policies, policy_count, SearchResult};
