use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("distance to an empty set is undefined")]
    UndefinedDistance,

    #[error("invalid map definition: {0}")]
    InvalidMap(String),

    #[error("point {x} is the critical point; a side must be given")]
    AmbiguousCriticalPoint { x: f64 },

    #[error("orbit hit the critical point at step {index}")]
    OrbitHitCritical { index: usize },

    #[error("preimage tree died after {last_nonempty} generations")]
    PreimageTreeDied { last_nonempty: usize },

    #[error("resolution too coarse at level {level}: refinement moved the attracting set by {gap:.3e} (> {limit:.3e})")]
    ResolutionTooCoarse { level: usize, gap: f64, limit: f64 },

    #[error("inconsistent decomposition at level {level}: {reason}")]
    Inconsistent { level: usize, reason: String },

    #[error("point {x} lies on the overlap set (within {eps:.3e})")]
    OnOverlap { x: f64, eps: f64 },

    #[error("orbit of {x} entered the overlap set at step {index}")]
    OrbitOnOverlap { x: f64, index: usize },

    #[error("value {v} falls in no level band")]
    AmbiguousLevel { v: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
