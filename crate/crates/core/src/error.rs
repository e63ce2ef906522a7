use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("node {0} is unreachable from node {1}")]
    Unreachable(usize, usize),
    #[error("walk length {0} exceeds node count; graph must be disconnected")]
    WalkTooLong(usize),
    #[error("owner {0} not in the queried node set")]
    OwnerNotInSet(usize),
    #[error("coalition too large for exact enumeration: {got} consumers, cap {cap}")]
    EnumerationCap { got: usize, cap: usize },
    #[error("price must be positive, got {0}")]
    NonPositivePrice(f64),
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("non-finite state encountered at t = {0}")]
    NonFiniteState(f64),
    #[error("voltage {v} at node {node} left the band [{lo}, {hi}] at t = {t}")]
    VoltageBand {
        node: usize,
        v: f64,
        lo: f64,
        hi: f64,
        t: f64,
    },
    #[error("linearization point lies on the voltage band boundary (node {0})")]
    BoundaryState(usize),
    #[error("equilibrium search did not converge (residual {0:.3e})")]
    NoEquilibrium(f64),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
