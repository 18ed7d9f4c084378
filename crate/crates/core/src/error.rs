use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} qubits, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid Pauli string {0:?}")]
    InvalidPauli(String),
    #[error("invalid state spec {0:?}: {1}")]
    InvalidSpec(String, String),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("not a density matrix: {0}")]
    InvalidState(String),
    #[error("party {party} out of range for {n} qubits")]
    PartyOutOfRange { party: usize, n: usize },
    #[error("bipartition must be a nonempty proper subset of the parties")]
    TrivialBipartition,
    #[error("setting {0} is not full weight")]
    NotFullWeight(String),
    #[error("setting {0} already measured")]
    DuplicateSetting(String),
    #[error("Bloch vector vanishes (|b| = {0:.3e})")]
    VanishingBloch(f64),
    #[error("filter annihilated the state (success probability {0:.3e})")]
    FilterAnnihilated(f64),
    #[error("out of order: expected {expected}, got {got}")]
    OutOfOrder { expected: String, got: String },
    #[error("correlation value {0} outside [-1, 1]")]
    ValueOutOfRange(f64),
    #[error("session is finished ({0})")]
    SessionFinished(String),
    #[error("no commuting string of length {expected} found for N={n} (best {found})")]
    StringSearch { n: usize, expected: usize, found: usize },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
