use thiserror::Error;

/// Errors produced by the analytic layer, the simulator and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// The lever `l_O` is too short or parallel to the surface normal, so no
    /// S-plane exists. Callers treat this as the centered (beta = 0) case.
    #[error("degenerate S-plane: lever is zero or parallel to the surface normal")]
    DegenerateSPlane,
    #[error("driving force is zero")]
    ZeroForce,
    #[error("driving force does not push toward the surface")]
    WrongSide,
    #[error("contact count must be 1, 2 or 3 (got {0})")]
    BadContactCount(usize),
    #[error("value out of valid range: {0}")]
    OutOfValidRange(String),
    #[error("normal force is zero")]
    ZeroNormalForce,
    #[error("pendulum inertia m*|l_C|^2 is zero")]
    ZeroInertia,
    #[error("non-finite state at t = {time_s} s")]
    NonFiniteState { time_s: f64 },
    #[error("empty series")]
    EmptySeries,
    #[error("series lengths differ")]
    LengthMismatch,
    #[error("every reference force sample is below the usable threshold")]
    ZeroReference,
    #[error("trace of {duration_s} s is shorter than the steady window of {window_s} s")]
    TraceTooShort { duration_s: f64, window_s: f64 },
    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
