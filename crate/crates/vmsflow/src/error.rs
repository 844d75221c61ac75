//! Crate-wide error type.

/// Unified error for meshing, assembly, solver, and I/O failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("Newton did not converge after {iters} iterations (residual {residual:.3e})")]
    NewtonDiverged { iters: usize, residual: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("no Dirichlet value supplied for constrained dof {dof}")]
    MissingBoundaryValue { dof: usize },

    #[error("rank deficient: requested {requested} modes, only {achievable} achievable")]
    RankDeficient { requested: usize, achievable: usize },

    #[error("time step {index} (t = {time}): {source}")]
    Step {
        index: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
