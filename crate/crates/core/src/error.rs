use thiserror::Error;

/// Errors raised by the simulator and the diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of a function.
    #[error("domain error: {0}")]
    Domain(String),
    /// Input data violates a documented precondition.
    #[error("validation error: {0}")]
    Validation(String),
    /// A simulation state violates an invariant (indicates an integrator bug).
    #[error("state error: {0}")]
    State(String),
    /// The Newton solve of one time step did not converge.
    #[error("newton solve failed after {iterations} iterations (residual {residual:e}, dt {dt:e})")]
    Step {
        iterations: usize,
        residual: f64,
        dt: f64,
    },
    /// A requested time lies outside the trajectory.
    #[error("range error: {0}")]
    Range(String),
    /// A run configuration is inadmissible.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Validation(_)
                | Error::Config(_)
                | Error::Range(_)
                | Error::Json(_)
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
