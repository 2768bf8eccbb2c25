use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Longitudinal speed dropped to or below the kinematic validity limit.
    #[error("degenerate speed: vx = {vx} m/s is at or below {limit} m/s")]
    DegenerateSpeed { vx: f64, limit: f64 },

    #[error("simulation fault: {0}")]
    SimulationFault(String),

    #[error("allocation failed: system condition number {condition:e} exceeds {limit:e}")]
    Allocation { condition: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("training aborted: {0}")]
    TrainingAbort(String),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("malformed csv: {0}")]
    CsvFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Returns `value` unchanged, or a simulation fault naming `what` when it is not finite.
pub(crate) fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::SimulationFault(format!(
            "{what} is not finite ({value})"
        )))
    }
}
