use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot:e} at row {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("linear system is numerically singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix entries must be finite")]
    NonFinite,

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("could not draw a full-rank projection after {attempts} attempts")]
    RankDeficient { attempts: usize },

    #[error("covariance statistic is degenerate (diagonal mass {diagonal:e})")]
    DegenerateStatistic { diagonal: f64 },

    #[error("{name} = {value} is outside its domain")]
    Domain { name: &'static str, value: f64 },

    #[error("{trials} trials at alpha0 = {alpha0} leave too few exceedances to place a quantile")]
    InsufficientTrials { trials: usize, alpha0: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
