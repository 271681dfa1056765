use thiserror::Error;

/// Failures raised by model evaluation and parameter validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} = {value} is out of domain: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("cavity coupling is singular at omega = {omega} rad/s (omega^2 = delta^2 - gamma^2)")]
    Singularity { omega: f64 },

    #[error("degenerate state: {0}")]
    DegenerateState(&'static str),

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("unphysical covariance: {0}")]
    Unphysical(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ModelError::Domain {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

pub(crate) fn finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::Domain {
            name,
            value,
            reason: "must be finite",
        })
    }
}
