use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("empty policy")]
    EmptyPolicy,
    #[error("non-monotone policy: {0}")]
    NonMonotonePolicy(String),

    #[error("not-authorized: attribute set does not satisfy the access policy")]
    NotAuthorized,

    #[error("universe must contain the \"dummy\" attribute")]
    MissingDummyAttribute,
    #[error("duplicate attribute {0:?}")]
    DuplicateAttribute(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("policy root must be an AND gate with a direct \"dummy\" leaf")]
    PolicyMissingDummy,
    #[error("the \"dummy\" attribute must appear exactly once in the policy")]
    DummyNotUnique,

    #[error("bad signature")]
    BadSignature,
    #[error("bad fog signature on deletion response")]
    BadFogSignature,
    #[error("unknown fname {0}")]
    UnknownFname(String),
    #[error("no pending deletion request for fname {0}")]
    NoPendingRequest(String),
    #[error("a deletion request for fname {0} is already pending")]
    RequestPending(String),

    #[error("authentication failure")]
    AuthenticationFailure,

    #[error("not found: {0}")]
    NotFound(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("scenario error at step {step}: {message}")]
    Scenario { step: usize, message: String },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
