use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong inside the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("closed form unavailable for d = {0} (only d = 1/2 is supported)")]
    ClosedFormUnavailable(f64),

    #[error("nonpositive iterate {value:e} at node {node} (eta = {eta})")]
    Nonpositive { node: usize, eta: f64, value: f64 },

    #[error("iteration did not converge after {iterations} sweeps (last change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("iterate fell below the positivity floor at node {node} (eta = {eta}, value {value:e})")]
    BelowFloor { node: usize, eta: f64, value: f64 },

    #[error("sweep {sweep} increased the iterate at node {node} by {excess:e}")]
    NonMonotone { sweep: usize, node: usize, excess: f64 },

    #[error("shooting bracket [{lo}, {hi}] does not straddle the touchdown point")]
    Bracket { lo: f64, hi: f64 },

    #[error("integrator failure at eta = {eta}: {reason} (phi = {phi:e}, dphi = {dphi:e})")]
    Integrator {
        eta: f64,
        phi: f64,
        dphi: f64,
        reason: String,
    },

    #[error("Newton iteration diverged after {iterations} steps (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("insufficient resolution: {0}")]
    Resolution(String),

    #[error("time step underflow at t = {t} (dt = {dt:e})")]
    StepUnderflow { t: f64, dt: f64 },

    #[error("missing input: {0}")]
    Missing(String),

    #[error("malformed input {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
