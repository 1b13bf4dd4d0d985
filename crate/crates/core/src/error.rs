use std::path::PathBuf;

use crate::ensemble::Validity;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(Validity),

    #[error("stencil order L = {0} is too small: L >= 2 required")]
    Order(usize),

    #[error("under-determined stencil: {offsets} offsets cannot fix {order} derivatives (C >= L required)")]
    UnderDetermined { offsets: usize, order: usize },

    #[error("invalid offset set: {0}")]
    Offsets(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    /// 1-based world index whose local term diverges.
    #[error("interworld potential is singular at world {world}: {reason}")]
    Singularity { world: usize, reason: String },

    #[error("fitted density is not positive at world {world} (P = {value:e})")]
    NonPositiveDensity { world: usize, value: f64 },

    #[error("too few worlds: {needed} required, got {got}")]
    TooFewWorlds { needed: usize, got: usize },

    /// Ordering was lost during integration. Indices are 1-based.
    #[error("world ordering collapsed at step {step}: worlds {left} and {right}")]
    Collapse { step: u64, left: usize, right: usize },

    #[error("invalid simulation config: {0}")]
    Config(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
