use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the laboratory, from malformed systems to
/// solver aborts. The CLI maps each variant onto a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),

    #[error("diffusion is not symmetric positive definite at x = {at:?}")]
    NotSpd { at: Vec<f64> },

    #[error("potential does not generate the drift: |b + D grad U| = {deviation:e} at x = {at:?}")]
    PotentialMismatch { at: Vec<f64>, deviation: f64 },

    #[error("linear drift metadata disagrees with the drift field at x = {at:?}")]
    LinearMismatch { at: Vec<f64> },

    #[error("non-finite field value at x = {at:?}")]
    NonFinite { at: Vec<f64> },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("domain too small: {0}")]
    DomainTooSmall(String),

    #[error("boundary cells hold {mass:e} of the mass at t = {t}")]
    BoundaryMass { t: f64, mass: f64 },

    #[error("density went negative ({value:e}) in cell {cell} at t = {t}")]
    Negativity { t: f64, cell: usize, value: f64 },

    #[error("mass drifted by {drift:e} at t = {t}")]
    MassLoss { t: f64, drift: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("stationary solve did not converge: residual {residual:e}")]
    NoConvergence { residual: f64 },

    #[error("drift matrix is not Hurwitz (max real eigenvalue part {max_re})")]
    NotHurwitz { max_re: f64 },

    #[error("local-Gaussian regime does not apply: {0}")]
    Regime(String),

    #[error("trajectory left the safety box at t = {t}")]
    BlowUp { t: f64 },

    #[error("regression is rank deficient")]
    RankDeficient,

    #[error("snapshots are not uniformly spaced")]
    NonUniformSpacing,

    #[error("mismatched grids")]
    GridMismatch,

    #[error("{0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code: 2 configuration, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidInput(_)
            | Error::UnknownCatalog(_)
            | Error::NotSpd { .. }
            | Error::PotentialMismatch { .. }
            | Error::LinearMismatch { .. }
            | Error::Grid(_)
            | Error::Unsupported(_)
            | Error::GridMismatch => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
