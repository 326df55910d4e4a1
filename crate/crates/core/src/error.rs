use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid time interval [{start}, {end}]")]
    InvalidInterval { start: f64, end: f64 },

    #[error("point {point} is not inside the open cell ({start}, {end})")]
    OutsideCell { start: f64, end: f64, point: f64 },

    #[error("operation `{0}` is not available in this noise mode")]
    Unsupported(&'static str),

    #[error("{map} map did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        map: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("step from t = {t} failed")]
    Step {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("state is not finite at t = {t}")]
    NonFinite { t: f64 },

    #[error("step count exceeded the safety bound {limit} at t = {t}")]
    StepLimit { limit: usize, t: f64 },

    #[error("unknown {kind} id `{id}`")]
    UnknownId { kind: &'static str, id: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
