use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SoarError {
    /// Airspeed or bank outside the region where the drag polar is defined.
    #[error("invalid flight condition: airspeed {airspeed} m/s, bank {bank} rad")]
    InvalidFlightCondition { airspeed: f64, bank: f64 },

    #[error("time step must be positive, got {0}")]
    NonPositiveTimeStep(f64),

    #[error("filter constant must lie in (0, 1], got {0}")]
    FilterConstant(f64),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("invalid command: {0}")]
    InvalidCommand(String),

    /// Innovation variance was not positive; the covariance is corrupted.
    #[error("innovation variance {0} is not positive")]
    CorruptCovariance(f64),

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("polar fit needs at least two distinct airspeeds, got {0}")]
    TooFewAirspeeds(usize),

    #[error("polar fit design matrix is rank deficient (condition ratio {0:e})")]
    RankDeficient(f64),

    #[error("scenario field `{field}`: {reason}")]
    Scenario { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl SoarError {
    pub(crate) fn scenario(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SoarError::Scenario {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for SoarError {
    fn from(e: std::io::Error) -> Self {
        SoarError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SoarError>;
