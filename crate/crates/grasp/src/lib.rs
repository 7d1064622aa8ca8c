//! Greedy sparsity-constrained minimization of smooth cost functions.
//!
//! The central routine is gradient support pursuit: at each iteration the
//! solver evaluates the gradient at the current sparse iterate, selects the
//! `2s` coordinates where it is largest in magnitude, merges them with the
//! current support, minimizes the objective restricted to the merged support,
//! and prunes the result back to `s` nonzeros. For the squared-error
//! objective the scheme coincides with CoSaMP, and its restricted
//! gradient-descent variant with unit step coincides with iterative hard
//! thresholding.
//!
//! The crate also ships the conditioning diagnostics that predict when the
//! pursuit succeeds (stable restricted Hessian / linearization estimates,
//! matrix-Chernoff sample bounds), a synthetic data generator for sparse
//! logistic regression with AR(1) features, and a reproducible sweep harness
//! that records per-trial losses and recovery metrics as CSV.

pub mod analysis;
pub mod data;
pub mod objective;
pub mod solver;
pub mod sparse;
pub mod sweep;

pub use objective::{Dataset, LogisticLoss, Objective, QuadraticForm, SquaredError};
pub use solver::{
    grasp_iterate, grasp_iterate_detailed, grasp_solve, logit_omp, restricted_minimize,
    variant_step, GraspIteration, GraspOptions, IterationRecord, NewtonTarget, SolverReport,
    Termination, Variant,
};
pub use sparse::{best_k_term, restrict, support, top_k_support, DenseVector, SupportSet};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// The solver encountered a non-finite loss. When the outer loop fails,
    /// the report carries the partial trace with the last valid iterate.
    #[error("solver diverged: {reason}")]
    Diverged {
        reason: String,
        report: Option<Box<solver::SolverReport>>,
    },
    /// Malformed input file.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    /// Underlying I/O failure, annotated with the offending path.
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// An internal consistency check failed (a bug, not a usage error).
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
