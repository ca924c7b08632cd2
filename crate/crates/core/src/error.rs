use thiserror::Error;

/// Errors raised by the lab's numerical routines and samplers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("argument outside its domain: {0}")]
    Domain(String),

    #[error("sample must contain at least one value")]
    EmptySample,

    #[error("non-finite value {value} at position {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exact enumeration refused for volume {volume} (limit {limit})")]
    VolumeTooLarge { volume: usize, limit: usize },

    #[error("zero variance estimate: {0}")]
    ZeroVariance(String),

    #[error("coupling tail mass {tail:.3e} exceeds 1e-3 of retained mass {retained:.3e}; increase the cutoff radius")]
    TailMass { tail: f64, retained: f64 },

    #[error("non-finite local field at site {site}")]
    NonFiniteField { site: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
