use std::path::PathBuf;

/// Errors raised by the estimation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("no observed response inside the window around {point:?}")]
    WindowEmpty { point: Vec<f64> },

    #[error("degenerate scale estimate {value:e}")]
    DegenerateScale { value: f64 },

    #[error("insufficient support: {found} weighted observations, need {required}")]
    InsufficientSupport { found: usize, required: usize },

    #[error("singular local design (condition number {condition:e})")]
    SingularDesign { condition: f64 },

    #[error("IRLS did not converge after {iterations} iterations (score norm {score_norm:e})")]
    NoConvergence { iterations: usize, score_norm: f64 },

    #[error("singular kernel moment matrix")]
    SingularMoments,

    #[error("every grid point failed for component {alpha}")]
    AllPointsFailed { alpha: usize },

    #[error("coordinate {value} outside the grid [{lo}, {hi}] of component {alpha}")]
    OutOfGrid { alpha: usize, value: f64, lo: f64, hi: f64 },

    #[error("every bandwidth pair is infeasible")]
    AllPairsInfeasible,

    #[error("degenerate loss: E psi'(e) = {0:e}")]
    DegenerateLoss(f64),
}

/// Coarse classification used for exit codes and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } => ErrorKind::Io,
            Error::InvalidInput(_) | Error::Parse { .. } | Error::Empty(_) => ErrorKind::Validation,
            _ => ErrorKind::Numerical,
        }
    }

    /// Short stable identifier, e.g. `insufficient_support`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Empty(_) => "empty",
            Error::WindowEmpty { .. } => "window_empty",
            Error::DegenerateScale { .. } => "degenerate_scale",
            Error::InsufficientSupport { .. } => "insufficient_support",
            Error::SingularDesign { .. } => "singular_design",
            Error::NoConvergence { .. } => "no_convergence",
            Error::SingularMoments => "singular_moments",
            Error::AllPointsFailed { .. } => "all_points_failed",
            Error::OutOfGrid { .. } => "out_of_grid",
            Error::AllPairsInfeasible => "all_pairs_infeasible",
            Error::DegenerateLoss(_) => "degenerate_loss",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
