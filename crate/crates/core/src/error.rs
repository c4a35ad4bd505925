use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported velocity dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("the collision sphere degenerates in one velocity dimension; use the relaxation operator")]
    DegenerateSphere,

    #[error("density must be positive, found {value} at node {index}")]
    NonPositive { index: usize, value: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("-D is not positive definite (eigenvalues {0:?}); the relaxation kernel is misconfigured")]
    IndefiniteDiffusion(Vec<f64>),

    #[error("CFL condition violated: {0}")]
    Cfl(String),

    #[error("unknown manufactured case `{0}`")]
    UnknownCase(String),

    #[error("size condition fails: kappa = {kappa} >= 1 for alpha in [{alpha0}, {alpha1}]")]
    SizeCondition { kappa: f64, alpha0: f64, alpha1: f64 },

    #[error("training diverged at iteration {iteration}: loss {loss:e} exceeds {limit:e}")]
    Diverged { iteration: usize, loss: f64, limit: f64 },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, got })
    }
}
