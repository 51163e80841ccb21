use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("statement members must be pairwise distinct, got ({0}, {1}, {2})")]
    DuplicateMember(usize, usize, usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("object id {id} out of range for universe of size {n}")]
    IdOutOfRange { id: usize, n: usize },

    #[error("collection mixes most-central and odd-one-out statements")]
    MixedKinds,

    #[error("expected {expected} statements")]
    WrongKind { expected: &'static str },

    #[error("statement collection is empty")]
    EmptyCollection,

    #[error("requested {requested} distinct triples but only {available} exist")]
    CountExceedsTriples { requested: u128, available: u128 },

    #[error("{triples} triples exceed the exhaustive enumeration cap of {cap}")]
    TooLarge { triples: u128, cap: u128 },

    #[error("graph is disconnected: no path between {0} and {1}")]
    DisconnectedGraph(usize, usize),

    #[error("covariance of mixture component {0} is not symmetric positive definite")]
    BadCovariance(usize),

    #[error("invalid mixture specification: {0}")]
    BadMixture(String),

    #[error("error probability {0} must lie in [0, 1]")]
    BadErrorProb(f64),

    #[error("error probability {0} must be below 2/3 for the noise correction")]
    ErrorProbTooLarge(f64),

    #[error("sigma must be positive and finite, got {0}")]
    BadSigma(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("labeled object {id} has class {class} but only {classes} classes were declared")]
    UnknownLabel { id: usize, class: usize, classes: usize },

    #[error("class {0} has no labeled objects")]
    EmptyClass(usize),

    #[error("size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),

    #[error("key sets differ: {0}")]
    KeyMismatch(String),

    #[error("relative error undefined: the medoid objective is zero")]
    DegenerateObjective,

    #[error("isolated vertices {0:?}; raise k so the estimated graph is connected, or allow isolated vertices")]
    IsolatedVertices(Vec<usize>),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("matrix is not symmetric (|a_ij - a_ji| = {0:e})")]
    NotSymmetric(f64),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// True for failures of the numerical routines rather than of the input data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoConvergence(_) | Error::NotSymmetric(_))
    }
}
