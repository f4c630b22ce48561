use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("body does not provide the {0} oracle")]
    CapabilityMissing(&'static str),

    #[error("condition B(0,1) ⊆ K violated: certified inradius {inradius} < 1")]
    A1Violation { inradius: f64 },

    #[error("invalid body: {0}")]
    InvalidBody(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("cutting-plane solver hit its iteration cap ({iterations}) before certifying gap {gap_target} (best certificate {certified_gap})")]
    BudgetExceeded {
        iterations: usize,
        gap_target: f64,
        certified_gap: f64,
    },

    #[error("rejection loop exceeded its cap of {cap} proposals")]
    RejectionBudgetExceeded { cap: u64 },

    #[error("ellipsoid lost positive definiteness (g^T P g = {0})")]
    NumericalFailure(f64),

    #[error("hit-and-run could not bracket a chord through the current point")]
    DegenerateChord,

    #[error("In-and-Out RGO failed after {attempts} attempts")]
    InAndOutFailure { attempts: u64 },
}
