use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown layer kind `{0}`")]
    UnknownLayerKind(String),
    #[error("invalid network structure: {0}")]
    InvalidStructure(String),
    #[error("unsupported layer: {0}")]
    UnsupportedLayer(String),
    #[error("norm {norm} is not supported for {bound}")]
    UnsupportedNorm { norm: String, bound: &'static str },
    #[error("depth {depth} exceeds the subset-enumeration cap {cap}")]
    DepthTooLarge { depth: usize, cap: usize },
    #[error("layer width {width} exceeds the corner-enumeration cap {cap}")]
    WidthTooLarge { width: usize, cap: usize },
    #[error("{count} selector bits exceed the brute-force cap {cap}")]
    TooManyNeurons { count: usize, cap: usize },
    #[error("degenerate series: consecutive values {index} and {} are equal", index + 1)]
    DegenerateSeries { index: usize },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_)
            | Error::UnknownLayerKind(_)
            | Error::ShapeMismatch(_)
            | Error::InvalidStructure(_)
            | Error::UnsupportedLayer(_)
            | Error::Io(_) => 3,
            Error::UnsupportedNorm { .. } => 2,
            Error::DepthTooLarge { .. }
            | Error::WidthTooLarge { .. }
            | Error::TooManyNeurons { .. } => 4,
            Error::NonFinite
            | Error::NoConvergence { .. }
            | Error::DegenerateSeries { .. }
            | Error::InvariantViolation(_) => 5,
        }
    }

    /// Short stable identifier, printed alongside the message.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite => "non_finite",
            Error::NoConvergence { .. } => "no_convergence",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Parse(_) => "parse_error",
            Error::UnknownLayerKind(_) => "unknown_layer_kind",
            Error::InvalidStructure(_) => "invalid_structure",
            Error::UnsupportedLayer(_) => "unsupported_layer",
            Error::UnsupportedNorm { .. } => "unsupported_norm",
            Error::DepthTooLarge { .. } => "depth_too_large",
            Error::WidthTooLarge { .. } => "width_too_large",
            Error::TooManyNeurons { .. } => "too_many_neurons",
            Error::DegenerateSeries { .. } => "degenerate_series",
            Error::InvariantViolation(_) => "invariant_violation",
            Error::Io(_) => "io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
