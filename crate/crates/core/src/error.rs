use thiserror::Error;

/// Errors raised by the simulation engine and its file formats.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} qubits, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("{n_qubits} qubits exceeds the dense-oracle cap of {cap}")]
    OracleSize { n_qubits: usize, cap: usize },

    #[error("{0} qubits is not supported (must be 1..=64)")]
    QubitCount(usize),

    #[error("malformed Pauli token `{token}`")]
    PauliToken { token: String },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },

    #[error("operator is not Hermitian (phase exponent {0})")]
    NonHermitian(u8),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("all singular values fell below the truncation threshold {threshold:e} (largest {sigma_max:e})")]
    SingularSystem { threshold: f64, sigma_max: f64 },

    #[error("generator has zero l1 norm; the state is a fixed point")]
    FixedPoint,

    #[error("imaginary-time series did not converge (residual {0:e})")]
    SeriesNonConvergence(f64),

    #[error("shot allocation: {0}")]
    Allocation(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
