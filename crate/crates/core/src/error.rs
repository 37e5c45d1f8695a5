use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field mismatch: {0}")]
    FieldMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear solve failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("singular tridiagonal system at row {0}")]
    SingularPivot(usize),

    #[error("positivity violated: {0}")]
    Positivity(String),

    #[error("time step {dt:e} violates the stability limit {limit:e} ({reason})")]
    StepTooLarge { dt: f64, limit: f64, reason: String },

    /// Hypotheses of a convergence or Orlicz construction failed; the
    /// payload explains which ladder or family is at fault.
    #[error("{0}")]
    Refused(String),

    #[error("config error{}", format_violations(.0))]
    Config(Vec<String>),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

fn format_violations(v: &[String]) -> String {
    let mut out = String::new();
    for line in v {
        out.push_str("\n  - ");
        out.push_str(line);
    }
    out
}

impl Error {
    pub fn io(path: impl Into<std::path::PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}
