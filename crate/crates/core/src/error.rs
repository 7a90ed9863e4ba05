use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum SlabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("coordinate map is not a diffeomorphism: J = {value:.6e} at node {node:?}")]
    Geometry { value: f64, node: (usize, usize, usize) },
    #[error("surface left the smallness regime: {0}")]
    Smallness(String),
    #[error("advective stability bound violated: dt = {dt:.6e} > {limit:.6e}")]
    Stability { dt: f64, limit: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
    #[error("wrong regime: {0}")]
    Regime(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("root finder failed to bracket: {0}")]
    Bracket(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SlabError>;
