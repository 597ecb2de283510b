use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("negative weight {weight} on edge ({u}, {v})")]
    NegativeWeight { u: usize, v: usize, weight: f64 },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("vertex {vertex} out of range for a graph with {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },

    #[error("duplicate {kind} edge ({u}, {v})")]
    DuplicateEdge { u: usize, v: usize, kind: &'static str },

    #[error("coincident points at ({x}, {y})")]
    CoincidentPoints { x: f64, y: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    /// The Fiedler value is repeated, so its eigenvector (and the weight
    /// gradient derived from it) is not unique.
    #[error("gradient undefined: lambda2 is not a simple eigenvalue")]
    GradientUndefined,

    #[error("link {tx} -> RIS {ris} -> {rx} is not part of the assignment")]
    Unassigned { tx: usize, ris: usize, rx: usize },

    #[error("objective is not finite at the probe point")]
    NonFiniteObjective,

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
