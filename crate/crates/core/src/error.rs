use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("rabi frequency must be finite and nonnegative, got {0}")]
    InvalidRabi(f64),
    #[error("detuning must be finite, got {0}")]
    InvalidDetuning(f64),
    #[error("degenerate drive: probe and coupling are both zero")]
    DegenerateDrive,
    #[error("division by zero: {0}")]
    Division(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("schedule error: {0}")]
    Schedule(String),
    #[error("step size error: dt*{rate} = {product:.4} exceeds {limit} (rate {value})")]
    StepSize {
        rate: &'static str,
        value: f64,
        product: f64,
        limit: f64,
    },
    #[error("step budget exceeded: {steps} steps needed (rate {rate} = {value}), limit {limit}")]
    StepBudget {
        rate: &'static str,
        value: f64,
        steps: usize,
        limit: usize,
    },
    #[error("density matrix contract violation: {0}")]
    Contract(String),
    #[error("trace drift {drift:.3e} at t = {time:.4} (1/gamma) exceeds 1e-6")]
    TraceDrift { drift: f64, time: f64 },
    #[error("at x = {x_nm} nm: {source}")]
    AtPosition {
        x_nm: f64,
        #[source]
        source: Box<CoreError>,
    },
    #[error("domain error: {0}")]
    Domain(String),
}

impl CoreError {
    pub fn at(self, x_nm: f64) -> Self {
        CoreError::AtPosition {
            x_nm,
            source: Box::new(self),
        }
    }

    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        CoreError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
