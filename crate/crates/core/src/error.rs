use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("policy evaluation did not converge after {sweeps} sweeps (last change {change:e}, residual {residual:e})")]
    NotConverged {
        sweeps: usize,
        change: f64,
        residual: f64,
    },
}

pub type Result<T> = std::result::Result<T, GameError>;
