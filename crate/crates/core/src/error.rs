use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdgError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("singular local solver matrix on element {element}: {detail}")]
    SingularLocalSolver { element: usize, detail: String },

    #[error("singular front block at level {level}, front {front}")]
    SingularFront { level: usize, front: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("GMRES numerical breakdown at iteration {0}")]
    Breakdown(usize),

    #[error("unknown benchmark case id: {0}")]
    UnknownCase(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}
