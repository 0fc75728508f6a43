use thiserror::Error;

/// Errors raised by the decision engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid HEAVENS level {0}: expected one of 0, 1, 10, 100")]
    InvalidLevel(u32),

    #[error("weight `{name}` must be a finite non-negative number, got {value}")]
    InvalidWeight { name: &'static str, value: f64 },

    #[error("velocity must be a finite non-negative number of km/h, got {0}")]
    NegativeVelocity(f64),

    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("candidate count must be at least 1")]
    NoCandidates,

    #[error("empty candidate set")]
    EmptyCandidateSet,

    #[error("invalid SAW configuration: {0}")]
    InvalidSawConfig(String),

    #[error("invalid adaptation configuration: {0}")]
    InvalidAdaptationConfig(String),

    #[error("catalog has no \"No Action\" response (index {index})")]
    MissingNoAction { index: u32 },

    #[error("duplicate response index {0} in catalog")]
    DuplicateResponseIndex(u32),

    #[error("\"No Action\" response must have precondition `true`, found `{0}`")]
    NoActionPrecondition(String),

    #[error("precondition syntax error at byte {position}: {message}")]
    PreconditionSyntax { position: usize, message: String },

    #[error("max_iterations must be at least 1")]
    ZeroIterations,

    #[error("duplicate candidate instance: response {index} on `{target}`")]
    DuplicateCandidate { index: u32, target: String },

    #[error("no candidate satisfies the cost constraint and no \"No Action\" entry is present")]
    NoFeasibleCandidate,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
