use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid model or solver configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A quadrature or intermediate quantity was not finite.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e}): {what}")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// The coefficient iteration grew without bound.
    #[error(
        "theta1 iteration diverged (reached {theta1:e} after {iterations} iterations); \
         the growth condition rho > b*gamma + lambda*(k^gamma/zlow^gamma - 1) is likely violated"
    )]
    Divergence { iterations: usize, theta1: f64 },

    #[error("argmax of xi^-gamma * vbar sits on the grid edge xi = {xi}: {hint}")]
    ArgmaxAtEdge { xi: f64, hint: String },

    #[error("wealth is still {gap:e} above the floor at s = {horizon}; increase the horizon")]
    Horizon { horizon: f64, gap: f64 },

    #[error("shooting bracket does not straddle the solution: {0}")]
    Bracket(String),

    #[error("parameter mismatch: {0}")]
    Mismatch(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
