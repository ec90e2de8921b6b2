use thiserror::Error;

/// Rejected configuration, either structurally (bad file) or semantically
/// (values violate a module invariant).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum DynamicsError {
    #[error("non-finite {0} passed to the integrator")]
    NonFinite(&'static str),
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PerceptionError {
    #[error("observer and target share a depth; the optical axis is degenerate")]
    ZeroVerticalSeparation,
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ControlError {
    #[error("tag is out of view; visual servoing has no error signal")]
    TagOutOfView,
    #[error("sonar range must be positive, got {0}")]
    NonPositiveRange(f64),
}
