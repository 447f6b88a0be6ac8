//! Error types shared by every stage of the pipeline.

use thiserror::Error;

/// Everything that can go wrong between raw scores and a fitted model.
#[derive(Debug, Error)]
pub enum Error {
    /// Replicate score vectors for one workflow have different lengths.
    #[error("replicate score vectors differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    /// A score, covariate, or derived quantity is NaN or infinite.
    #[error("non-finite value in {context} at index {index}")]
    NonFinite { context: &'static str, index: usize },

    /// Too few candidate pairs to do anything meaningful.
    #[error("need at least {min} candidate pairs, got {got}")]
    TooFew { min: usize, got: usize },

    /// A scalar argument is outside its mathematical domain.
    #[error("{name} = {value} is outside {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    /// A cutoff grid is empty, out of order, or out of (0, 1].
    #[error("invalid cutoff grid: {0}")]
    InvalidGrid(String),

    /// A design matrix is inconsistent (ragged covariates, no workflows, ...).
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    /// Two curves that should share a grid do not.
    #[error("curve grids do not match ({left} vs {right} points)")]
    GridMismatch { left: usize, right: usize },

    /// The candidate coefficients make the model curve non-increasing, so a
    /// category probability is not positive.
    #[error("model curve is not strictly increasing: {0}")]
    NonmonotoneModel(String),

    /// No change-point candidate produced a usable fit.
    #[error("no change-point candidate in the search grid produced a converged fit")]
    AllFitsFailed,

    /// Too large a fraction of bootstrap replicates failed to converge.
    #[error("{failed} of {total} bootstrap replicates failed (limit {limit})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: usize,
    },

    /// The score information matrix is singular at every change-point
    /// candidate, so the null distribution cannot be simulated.
    #[error("information matrix is singular at every change-point candidate")]
    SingularInformation,
}

impl Error {
    /// True when the error describes bad input rather than a numerical
    /// failure of the fit itself. Callers use this to pick exit codes.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::LengthMismatch { .. }
                | Error::NonFinite { .. }
                | Error::TooFew { .. }
                | Error::Domain { .. }
                | Error::InvalidGrid(_)
                | Error::InvalidDesign(_)
                | Error::GridMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
