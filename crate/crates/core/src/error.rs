use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("register size {0} outside supported range 1..={max}", max = crate::densmat::MAX_QUBITS)]
    SizeOutOfRange(usize),

    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("target qubits must be distinct, got {0:?}")]
    DuplicateTargets(Vec<usize>),

    #[error("arity mismatch: operator acts on {expected} qubit(s), got {actual} target(s)")]
    ArityMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("Kraus operators violate completeness (max deviation {0:e})")]
    IncompleteChannel(f64),

    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("unphysical relaxation parameters: {0}")]
    Unphysical(String),

    #[error("parameter vector has length {actual}, layout expects {expected}")]
    ParameterLength { expected: usize, actual: usize },

    #[error("confusion matrix is singular or ill-conditioned (condition number {0:e})")]
    SingularMatrix(f64),

    #[error("no distribution supplied for measurement group {0}")]
    MissingGroup(usize),

    #[error("fitted curve does not cross the target on (0, 1)")]
    NoCrossing,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
