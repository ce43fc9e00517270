use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model primitive or distribution parameter is out of its admissible range.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("moment of order {order} diverges (pareto alpha = {alpha})")]
    MomentDiverges { order: u32, alpha: f64 },

    #[error("moment order {0} is not supported (must be 1..=4)")]
    UnsupportedMoment(u32),

    #[error("quadrature failed: {0}")]
    QuadratureFailure(String),

    #[error("infeasible moment targets: second moment {second} < mean^2 = {}", mean * mean)]
    Infeasible { mean: f64, second: f64 },

    /// Station 2 is overloaded, so its busy periods have infinite mean.
    #[error("station 2 is overloaded: rho = lambda2 * b2 = {rho} >= 1")]
    Unstable2 { rho: f64 },

    #[error("queue content {total} exceeded the explosion cap {cap} at t = {time}")]
    ExplosionGuard { total: u64, cap: u64, time: f64 },

    #[error("horizon {horizon} leaves too few samples after discarding warm-up {warmup}")]
    InsufficientHorizon { horizon: f64, warmup: f64 },

    #[error("bad bisection bracket: {0}")]
    BadBracket(String),

    #[error("lambda1 = {lambda1} does not separate the service rates {r_base} and {r_alt}")]
    NotSeparating { lambda1: f64, r_base: f64, r_alt: f64 },

    #[error("moment demo is degenerate: both systems have service rate {0}")]
    DegenerateDemo(f64),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
