//! Periodic agent-state Q-learning for finite POMDPs.

pub mod chain;
pub mod dp;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod learner;
pub mod linalg;
pub mod model;
pub mod reference;
pub mod repro;
pub mod scalar;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use model::{AgentStateMachine, PeriodicPolicy, QTuple, TabularPomdp};
pub use scalar::{Real, Scalar};

pub type Rational = num_rational::Ratio<i64>;
pub type Pomdp = TabularPomdp<f64>;
pub type Pomdp32 = TabularPomdp<f32>;
pub type Policy = PeriodicPolicy<f64>;
pub type QTable = QTuple<f64>;
