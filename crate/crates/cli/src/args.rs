use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(
    name = "pasql",
    version,
    about = "Periodic agent-state Q-learning experiments"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Output directory for CSV and JSON files.
    #[arg(long, global = true, env = "PASQL_OUT", default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated run seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Solver tolerance for the exact pipeline.
    #[arg(long, global = true, default_value_t = 1e-12)]
    pub tol: f64,
    /// Proceed when structural checks or schedule conditions fail.
    #[arg(long, global = true)]
    pub unchecked: bool,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run PASQL for each seed and write the Q traces.
    Learn(LearnArgs),
    /// Evaluate a policy.
    Eval(EvalArgs),
    /// Exhaustive search over deterministic periodic policies.
    Search(SearchArgs),
    /// Exact limit of PASQL: cyclic distribution, Q_μ and its greedy policy.
    Limit(LimitArgs),
    /// Truncated-history estimate of the sub-optimality bound.
    Bound(BoundArgs),
    /// Structural checks and cyclic limiting distribution of the joint chain.
    Chain(LimitArgs),
    /// Multi-seed learning runs with summary statistics and the exact limit.
    Convergence(LearnArgs),
    /// Regenerate reference tables and compare with the published values.
    Repro(ReproArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    /// Six-state benchmark with perturbation `--p`.
    Fig4,
    /// Counting chain with triangular-number resets.
    Example1,
    /// Three-state single-observation model.
    Example2,
    /// T-maze with corridor half-length `--n`.
    Example3,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoalArg {
    Upper,
    Lower,
}

fn default_p() -> f64 {
    0.01
}

fn default_n() -> u32 {
    2
}

/// Environment and agent selection.
#[derive(Args, Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvArgs {
    /// Built-in environment.
    #[arg(long, value_enum, conflicts_with = "model")]
    #[serde(default, rename = "name")]
    pub env: Option<EnvName>,
    /// Model file (JSON).
    #[arg(long)]
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Perturbation of the six-state benchmark.
    #[arg(long, default_value_t = 0.01)]
    #[serde(default = "default_p")]
    pub p: f64,
    /// T-maze corridor half-length.
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_n")]
    pub n: u32,
    /// Fix the T-maze goal instead of drawing it per episode.
    #[arg(long, value_enum)]
    #[serde(default)]
    pub goal: Option<GoalArg>,
    /// Agent-state machine file (JSON); default is the last observation.
    #[arg(long)]
    #[serde(default)]
    pub agent: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// `start · (end/start)^{t/horizon}`.
    Exponential,
    /// `c / n^ω` on the n-th visit to a cell.
    Poly,
    Constant,
}

#[derive(Args, Debug, Clone)]
pub struct LearnArgs {
    /// Experiment config file (JSON); replaces the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub env: EnvArgs,
    /// Behaviour policy: mu1..mu3, mubar1..mubar3, uniform, or a policy file.
    #[arg(long)]
    pub behavior: Option<String>,
    /// Period of the learner (default: the behaviour policy's).
    #[arg(long = "L")]
    pub period: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    pub steps: u64,
    /// Snapshot interval (default: final step only).
    #[arg(long)]
    pub log_every: Option<u64>,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Poly)]
    pub schedule: ScheduleKind,
    #[arg(long, default_value_t = 1e-3)]
    pub lr_start: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub lr_end: f64,
    /// Decay horizon of the exponential schedule (default: `--steps`).
    #[arg(long)]
    pub lr_horizon: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    pub lr_c: f64,
    #[arg(long, default_value_t = 0.85)]
    pub lr_omega: f64,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMethod {
    /// Linear solve on tabular models, single rollout on deterministic ones.
    Auto,
    Exact,
    Rollout,
    Mc,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    /// Policy file (JSON).
    #[arg(long, conflicts_with = "actions", required_unless_present = "actions")]
    pub policy: Option<PathBuf>,
    /// Deterministic policy as base-nA digits in (phase, z) order.
    #[arg(long)]
    pub actions: Option<String>,
    /// Period of `--actions` (default: digits / nZ).
    #[arg(long = "L")]
    pub period: Option<usize>,
    #[arg(long, value_enum, default_value_t = EvalMethod::Auto)]
    pub method: EvalMethod,
    #[arg(long, default_value_t = 1e-4)]
    pub tail_tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub rollouts: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[arg(long = "L")]
    pub period: usize,
    /// Refuse enumerations larger than this.
    #[arg(long, default_value_t = 1 << 24)]
    pub cap: u128,
    #[arg(long, default_value_t = 1e-4)]
    pub tail_tol: f64,
}

#[derive(Args, Debug, Clone)]
pub struct LimitArgs {
    #[command(flatten)]
    pub env: EnvArgs,
    #[arg(long)]
    pub behavior: String,
    #[arg(long = "L")]
    pub period: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct BoundArgs {
    #[command(flatten)]
    pub limit: LimitArgs,
    /// History-tree depth.
    #[arg(long, default_value_t = 8)]
    pub depth: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub node_cap: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ReproArgs {
    /// Table ids, or `all`.
    #[arg(default_values_t = vec!["all".to_string()])]
    pub tables: Vec<String>,
}
