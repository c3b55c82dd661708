use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dense representation of dimension {dim} exceeds the cap of {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("Krylov propagation did not converge (achieved error estimate {residual:.3e}, requested {tol:.3e})")]
    KrylovNoConvergence { residual: f64, tol: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operator is not invariant under lattice translation")]
    NotTranslationInvariant,

    #[error("state synthesis is degenerate: {denominator} vanishes")]
    DegenerateSynthesis { denominator: &'static str },

    #[error("non-unitary step angle {dt_tilde} leaves the range |a_y dt| < pi/4")]
    StepOutOfRange { dt_tilde: f64 },

    #[error("postselected branch vanished (probability {probability:.3e})")]
    VanishingBranch { probability: f64 },

    #[error("adaptive step size underflowed below {min_dt:e} at t = {time}")]
    StepUnderflow { time: f64, min_dt: f64 },

    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
}
