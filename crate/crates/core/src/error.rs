use thiserror::Error;

/// Errors raised by the model, the solvers and the oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid vehicle parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("invalid track profile `{field}`: {reason}")]
    InvalidProfile { field: &'static str, reason: String },

    #[error("wheel delays are undefined for a stationary vehicle (speed = 0)")]
    DelaysUndefined,

    #[error("non-finite input to the derivative function")]
    NonFiniteInput,

    #[error("integration diverged at step {step} (t = {time} s)")]
    Diverged { step: usize, time: f64 },

    #[error("invalid step control: {0}")]
    InvalidStepControl(String),

    #[error("invalid time span: t0 = {t0}, t1 = {t1}, h = {h}")]
    InvalidSpan { t0: f64, t1: f64, h: f64 },

    #[error(
        "step size underflow at t = {time} s: h = {step:e} < h_min = {h_min:e} \
         (error norm {error_norm:e}, {accepted} accepted / {rejected} rejected steps)"
    )]
    StepSizeUnderflow {
        time: f64,
        step: f64,
        h_min: f64,
        error_norm: f64,
        accepted: usize,
        rejected: usize,
    },

    #[error("invalid worker plan: {0}")]
    InvalidPlan(String),

    #[error("singular matrix (pivot {pivot:e} in column {column})")]
    SingularMatrix { column: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("resolvent is singular at omega = {omega} rad/s (undamped resonance)")]
    ResonanceUndamped { omega: f64 },

    #[error("window of {window} s is too short: need at least {required} s")]
    InsufficientWindow { window: f64, required: f64 },

    #[error("time series is empty")]
    EmptySeries,

    #[error("worker panicked: {0}")]
    WorkerPanic(String),
}

pub type Result<T> = std::result::Result<T, Error>;
