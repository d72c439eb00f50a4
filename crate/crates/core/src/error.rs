use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants map onto the failure classes the command-line front end turns
/// into exit codes: validation problems (exit 2) and numerical failures (exit 3).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("exponents out of range: {0}")]
    RangeViolation(String),

    #[error("exponents not below the critical hyperbola: {0}")]
    SubcriticalViolation(String),

    #[error("coefficient field is singular or non-positive at |x| = {radius}: {detail}")]
    SingularPoint { radius: f64, detail: String },

    #[error("invalid coefficient field: {0}")]
    InvalidCoefficient(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("point is not on the domain boundary (|x| = {radius})")]
    NotOnBoundary { radius: f64 },

    #[error("shooting failed: {0}")]
    ShootingFailure(String),

    #[error("Newton iteration diverged: {0}")]
    NewtonDivergence(String),

    #[error("iterate left the positive cone: {0}")]
    NonPositive(String),

    #[error("profile tail too short for a decay fit: {0}")]
    TailTooShort(String),

    #[error("grid resolution too coarse: {0}")]
    BadResolution(String),

    #[error("solver converged to a trivial state: {0}")]
    CollapsedToTrivial(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported reduced dimension {0}; Hopf reductions give 3, 5 or 9")]
    UnsupportedDimension(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("solve failed at eps = {eps}: {source}")]
    AtEpsilon {
        eps: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::RangeViolation(_) => "RangeViolation",
            Error::SubcriticalViolation(_) => "SubcriticalViolation",
            Error::SingularPoint { .. } => "SingularPoint",
            Error::InvalidCoefficient(_) => "InvalidCoefficient",
            Error::InvalidDomain(_) => "InvalidDomain",
            Error::NotOnBoundary { .. } => "NotOnBoundary",
            Error::ShootingFailure(_) => "ShootingFailure",
            Error::NewtonDivergence(_) => "NewtonDivergence",
            Error::NonPositive(_) => "NonPositive",
            Error::TailTooShort(_) => "TailTooShort",
            Error::BadResolution(_) => "BadResolution",
            Error::CollapsedToTrivial(_) => "CollapsedToTrivial",
            Error::InsufficientData(_) => "InsufficientData",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::Precondition(_) => "Precondition",
            Error::LinearSolve(_) => "LinearSolve",
            Error::Format(_) => "Format",
            Error::Io(_) => "Io",
            Error::AtEpsilon { source, .. } => source.kind(),
        }
    }

    /// True for errors caused by bad input rather than by a numerical failure.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::RangeViolation(_)
            | Error::SubcriticalViolation(_)
            | Error::SingularPoint { .. }
            | Error::InvalidCoefficient(_)
            | Error::InvalidDomain(_)
            | Error::NotOnBoundary { .. }
            | Error::BadResolution(_)
            | Error::InsufficientData(_)
            | Error::UnsupportedDimension(_)
            | Error::Precondition(_)
            | Error::Format(_) => true,
            Error::AtEpsilon { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
