use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),
    #[error("operation requires a {expected} lattice")]
    WrongLatticeKind { expected: &'static str },
    #[error("empty site set")]
    EmptySiteSet,
    #[error("graph is disconnected")]
    Disconnected,
    #[error("{0} out of bounds")]
    OutOfBounds(&'static str),
    #[error("region spec does not partition the carriers: {0}")]
    BadRegionSpec(String),
    #[error("relabeling map is not strictly increasing on the sampled values")]
    NotMonotone,
    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),
    #[error("trimming emptied the path (neighborhood radius too large)")]
    DegenerateTrim,
    #[error("sites are not connected in the forest")]
    NotInSameTree,
}

pub type Result<T> = std::result::Result<T, Error>;
