//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("graph error: {0}")]
    Graph(String),

    #[error("cycle detected through nodes {}", format_cycle(.0))]
    Cycle(Vec<usize>),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("simulation error: {0}")]
    Sem(String),

    #[error("basis error: {0}")]
    Basis(String),

    #[error("scoring error: {0}")]
    Score(String),

    #[error("problem construction error: {0}")]
    Mip(String),

    #[error("solver error: {0}")]
    Solve(String),

    #[error("subproblem infeasible")]
    Infeasible,

    #[error("did not converge: {0}")]
    Convergence(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

fn format_cycle(nodes: &[usize]) -> String {
    // user-facing, so 1-indexed
    let mut s = String::new();
    for (i, v) in nodes.iter().enumerate() {
        if i > 0 {
            s.push_str(" -> ");
        }
        s.push_str(&(v + 1).to_string());
    }
    if let Some(first) = nodes.first() {
        s.push_str(" -> ");
        s.push_str(&(first + 1).to_string());
    }
    s
}
