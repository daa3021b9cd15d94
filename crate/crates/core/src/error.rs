use thiserror::Error;

/// Errors surfaced by constructors and solvers. Checks that are meant to
/// *report* rather than fail (axiom sweeps, hypothesis sweeps) return report
/// structs instead of this type.
#[derive(Debug, Error)]
pub enum PwError {
    #[error("q = {0} is not prime")]
    NotPrime(u32),
    #[error("q = {0} is below the minimum 3")]
    TooSmall(u32),
    #[error("q = {0} exceeds the enumeration bound {1}")]
    AboveBound(u32, u32),
    #[error("hyperplane section is degenerate: {0}")]
    DegenerateSection(String),
    #[error("not doubly subtended: ovoid of outer point {point} has {count} subtenders")]
    NotDoublySubtended { point: u32, count: usize },
    #[error("pair ({x}, {y}) matches no relation: {detail}")]
    UnclassifiablePair { x: u32, y: u32, detail: String },
    #[error("not an association scheme: {0}")]
    NotAScheme(String),
    #[error("bad scheme file: {0}")]
    BadSchemeFile(String),
    #[error("class index {0} out of range 1..={1}")]
    BadClassIndex(usize, usize),
    #[error("linear system inconsistent: {0}")]
    InconsistentSystem(String),
    #[error("pin contradiction on {unknown}: {existing} vs {new}")]
    PinContradiction {
        unknown: String,
        existing: String,
        new: String,
    },
    #[error("characterization failure: {0}")]
    Characterization(String),
    #[error("spectral verification failed: {0}")]
    Spectral(String),
    #[error("prerequisite not satisfied: {0}")]
    MissingPrerequisite(String),
    #[error("invalid incidence structure: {0}")]
    BadIncidence(String),
    #[error("sunflower precondition violated: {0}")]
    SunflowerPrecondition(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type PwResult<T> = Result<T, PwError>;
