use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate node `{0}`")]
    DuplicateNode(String),

    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),

    #[error("self edge on `{0}`; self-decay is set through the node's decay field")]
    SelfEdge(String),

    #[error("invalid node name `{0}`")]
    InvalidName(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("feedback detected: the direct-influence graph has a cycle through {0:?}")]
    CycleDetected(Vec<String>),

    #[error("node `{node}` has non-positive decay {decay}")]
    NonPositiveDecay { node: String, decay: f64 },

    #[error("node `{node}` has negative noise {noise}")]
    NegativeNoise { node: String, noise: f64 },

    #[error("root node `{0}` has no noise and would be identically zero")]
    RootWithoutNoise(String),

    #[error("non-finite value for {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("singular conditioning set: {0}")]
    SingularConditioning(String),

    #[error("deterministic relation: the information is infinite ({0})")]
    DeterministicRelation(String),

    #[error("time step {dt} too large for the explicit scheme (must be below {limit})")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("closed forms for the feed-forward loop require gamma = 0 (got {0})")]
    GammaNonZero(f64),

    #[error("invalid lag {0}")]
    InvalidLag(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that make a network definition unusable.
    pub fn is_invalid_network(&self) -> bool {
        matches!(
            self,
            Error::DuplicateNode(_)
                | Error::DuplicateEdge(..)
                | Error::SelfEdge(_)
                | Error::InvalidName(_)
                | Error::CycleDetected(_)
                | Error::NonPositiveDecay { .. }
                | Error::NegativeNoise { .. }
                | Error::RootWithoutNoise(_)
                | Error::NonFinite(_)
        )
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure(_)
                | Error::SingularConditioning(_)
                | Error::DeterministicRelation(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
