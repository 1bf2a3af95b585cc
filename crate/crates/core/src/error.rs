use thiserror::Error;

use crate::solver::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("could not place link {link} after {attempts} attempts; the area is too crowded for this link count")]
    PlacementFailed { link: usize, attempts: usize },

    #[error("regulation violated on link {link}: 2^(t/tau)·p = {value} >= 1, the exponential AoI expectation diverges")]
    RegulationViolated { link: usize, value: f64 },

    #[error("fixed point outside the multiplier domain on link {link}: {reason}")]
    MultiplierDomain { link: usize, reason: String },

    #[error("trace for link {link} has no peak-AoI samples")]
    EmptyTrace { link: usize },

    #[error("fixed point infeasible for {constraint} on link {link} (residual {residual:e})")]
    InfeasibleFixedPoint {
        constraint: &'static str,
        link: usize,
        residual: f64,
    },

    #[error("initialization infeasible on link {link}: worst-case outage {outage:e} exceeds the regulation cap {cap:e}; reduce the payload or raise the power")]
    InitializationInfeasible { link: usize, outage: f64, cap: f64 },

    #[error("inner convex solve failed at SCA iteration {iteration}: {source}")]
    InnerSolve {
        iteration: usize,
        #[source]
        source: SolverError,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}
