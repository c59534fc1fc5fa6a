use thiserror::Error;

pub type Result<T, E = DrgError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrgError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The flow denominator vanished (Δ = Λ with γΛ = 0).
    #[error(
        "singular flow at lambda={lambda:e} (delta={delta:e}, gamma={gamma:e}); \
         use a smaller step or a nonzero gamma seed"
    )]
    SingularFlow { lambda: f64, delta: f64, gamma: f64 },

    #[error("step size underflow at lambda={lambda:e} (step={step:e})")]
    StepUnderflow { lambda: f64, step: f64 },

    #[error("flow exceeded {steps} steps at lambda={lambda:e}")]
    StepLimit { lambda: f64, steps: usize },

    #[error("step size underflow at t={t:e} (step={step:e})")]
    TimeStepUnderflow { t: f64, step: f64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("rate schedule does not cover t={t:e} (covered up to {covered:e})")]
    ScheduleGap { t: f64, covered: f64 },

    #[error("stability: {0}")]
    Stability(String),

    #[error("fit failed: {reason} (residual norm {residual_norm:e})")]
    Fit { reason: String, residual_norm: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}
