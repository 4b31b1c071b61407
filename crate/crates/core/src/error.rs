use thiserror::Error;

use crate::solver::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A delayed argument or window violated `lower(t) <= t` or its lag bound.
    #[error("invalid delay: {0}")]
    InvalidDelay(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    /// Missing or inconsistent analysis settings (horizon, step, grid).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// The operation does not apply to this equation shape.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid equation: {0}")]
    InvalidEquation(String),

    #[error("no positive equilibrium: {0}")]
    NoEquilibrium(String),

    #[error("quantity is undefined: {0}")]
    Undefined(String),

    /// The state left the finite range; the partial trajectory is kept.
    #[error("solution diverged at t = {time}")]
    Divergence {
        time: f64,
        trajectory: Box<Trajectory>,
    },

    #[error("bisection bracket [{lo}, {hi}] does not change predicate value ({value})")]
    Bracketing { lo: f64, hi: f64, value: bool },

    #[error("unknown target `{name}`; valid built-ins: {valid}")]
    UnknownTarget { name: String, valid: String },

    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
