use thiserror::Error;

use crate::model::Diagnostic;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {}", format_diagnostics(.0))]
    InvalidModel(Vec<Diagnostic>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular linear system")]
    Singular,

    #[error("enumeration of {count} policies exceeds the cap of {cap}")]
    EnumerationCap { count: u128, cap: u128 },

    #[error("history tree exceeds the node cap of {cap}")]
    NodeCap { cap: usize },

    #[error("parse error in {context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
