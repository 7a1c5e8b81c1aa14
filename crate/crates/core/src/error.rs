use thiserror::Error;

use crate::matcore::MatError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] MatError),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid rank {rank} for dimension {dim}")]
    InvalidRank { rank: usize, dim: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("denominator {value:.3e} is at or below {threshold:.1e}; every state is nearly orthogonal to the reference")]
    DegenerateDenominator { value: f64, threshold: f64 },

    #[error("SDP constraints are inconsistent (residual {residual:.3e})")]
    Infeasible { residual: f64 },

    #[error("SDP solver broke down: {0}")]
    NumericalFailure(String),

    #[error("measurement subproblem for pair ({i}, {j}) failed: {source}")]
    PairFailed {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Dinkelbach iteration did not converge in {iterations} iterations (residual {residual:.3e})")]
    DinkelbachMaxIter { iterations: usize, residual: f64 },

    #[error("all {restarts} restarts failed; last error: {last}")]
    AllRestartsFailed { restarts: usize, last: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
