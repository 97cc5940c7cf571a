use thiserror::Error;

/// Errors raised while building or applying a discretization.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("singular point: {0}")]
    SingularPoint(String),
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),
    #[error("sequencing error: {0}")]
    Sequencing(String),
    #[error("numeric error in element {element}: {message}")]
    Numeric { element: usize, message: String },
    #[error("resource guard: {requested} degrees of freedom exceed the cap of {cap}")]
    ResourceGuard { requested: usize, cap: usize },
}

pub type Result<T> = std::result::Result<T, DgError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(DgError::InvalidArgument(msg.into()))
}
