use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible matrices: dimension {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("vertex {vertex} out of range in column {column} (num_vertices = {num_vertices})")]
    VertexOutOfRange {
        column: usize,
        vertex: usize,
        num_vertices: usize,
    },

    #[error("column {0} is empty")]
    EmptyColumn(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("non-finite value {value} at ({row}, {col})")]
    NonFinite { row: usize, col: usize, value: f64 },

    #[error("exhaustive search over {candidates} candidates exceeds the limit of {limit}")]
    OracleScale { candidates: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("linear system (I - xi*Theta) is singular or ill-posed at xi = {xi}; try a smaller xi")]
    SingularSystem { xi: f64 },

    #[error("labels must contain at least one positive and one negative")]
    SingleClassLabels,

    #[error("no positive labels")]
    NoPositives,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty candidate pool")]
    EmptyPool,

    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
