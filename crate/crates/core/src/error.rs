use thiserror::Error;

/// Errors raised by sector construction, model assembly, propagation and gate synthesis.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("sector dimension {dimension} exceeds the cap of {cap}")]
    Capacity { dimension: u128, cap: usize },
    #[error("mode index {index} out of range for {mode_count} modes")]
    IndexOutOfRange { index: usize, mode_count: usize },
    #[error("hopping requires distinct modes, got {0} twice")]
    SameMode(usize),
    #[error("Fock states are not eigenvectors when tau = {0}")]
    NonDiagonal(f64),
    #[error("two-qubit sector with {0} particles is outside the computational space")]
    UnsupportedSector(usize),
    #[error("inconsistent mode layout: {0}")]
    InconsistentLayout(String),
    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NonHermitian { deviation: f64 },
    #[error("time {t} lies outside the window [0, {duration}]")]
    OutOfWindow { t: f64, duration: f64 },
    #[error("infeasible pulse shape: {0}")]
    InfeasibleShape(String),
    #[error("step size infeasible: {0}")]
    StepSizeInfeasible(String),
    #[error("degeneracy condition violated (residual {0:e})")]
    DegeneracyViolated(f64),
    #[error("energy gap {0} must be positive")]
    ZeroGap(f64),
    #[error("no leakage-free constant-mu gate for m1 = {m1}, m2 = {m2} (need m2 > 2 m1)")]
    QuantizationInfeasible { m1: u32, m2: u32 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state norm {0} deviates from 1")]
    NotNormalized(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("schedule violates the {gate} control pattern: {reason}")]
    SchedulePattern { gate: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
