use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The scenario document does not match the expected schema.
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// The scenario parsed but violates an invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: transmitter and receiver coincide")]
    DegenerateGeometry,

    #[error("user {user} has zero channel gain to serving UAV {uav}")]
    InfeasibleChannel { uav: usize, user: usize },

    #[error("user {user} has zero channel gain to every UAV")]
    NoCoverage { user: usize },

    #[error("no RIS is associated with UAV {uav}")]
    EmptyRisSet { uav: usize },

    #[error("U-R link UAV {uav} -> RIS {ris} has zero path loss")]
    ZeroPathLoss { uav: usize, ris: usize },

    #[error("solver failure after {iterations} iterations: {reason}")]
    SolverFailure {
        reason: String,
        iterations: usize,
        /// Residual norms per iteration, most recent last.
        trace: Vec<f64>,
    },

    #[error("infeasible: constraint {constraint} violated by {violation:e}")]
    Infeasible { constraint: usize, violation: f64 },

    #[error("search space too large: {points} points")]
    TooLarge { points: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn solver(reason: impl Into<String>, iterations: usize, trace: Vec<f64>) -> Self {
        Error::SolverFailure {
            reason: reason.into(),
            iterations,
            trace,
        }
    }
}
