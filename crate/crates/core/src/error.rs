use thiserror::Error;

/// Every failure the library can report. The kebab-case `code()` is what the
/// command-line layer writes into its machine-readable error JSON.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("singular bordered system: {0}")]
    SingularSystem(String),
    #[error("near-singular operator (sigma_min = {sigma_min:.3e})")]
    NearSingularOperator { sigma_min: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("range escape: field range [{min:.6}, {max:.6}] leaves profile interval [{lo:.6}, {hi:.6}]")]
    RangeEscape { min: f64, max: f64, lo: f64, hi: f64 },
    #[error("critical point detected: |grad| = {grad:.3e} at r = {r:.6}, theta = {theta:.6}")]
    CriticalPointDetected { grad: f64, r: f64, theta: f64 },
    #[error("field is not in the admissible class: {0}")]
    NotInFplus(String),
    #[error("area mismatch: relative discrepancy {relative:.3e}")]
    AreaMismatch { relative: f64 },
    #[error("trajectory left the annulus at r = {r:.6}")]
    TrajectoryExit { r: f64 },
    #[error("direction is not tangent: defect {defect:.3e} exceeds {tol:.3e}")]
    NotTangent { defect: f64, tol: f64 },
    #[error("profile derivative is not positive on the range (min {min:.3e})")]
    NonpositiveFprime { min: f64 },
    #[error("samples are not strictly increasing (min gap {min_gap:.3e})")]
    NotMonotone { min_gap: f64 },
    #[error("degenerate norm in ratio ({0:.3e})")]
    DegenerateNorm(f64),
    #[error("Id+K is singular (sigma_min = {sigma_min:.3e})")]
    SingularIdPlusK { sigma_min: f64 },
    #[error("iteration diverged at step {iteration}")]
    Diverged { iteration: usize },
    #[error("inner solve failed at iteration {iteration}: {source}")]
    InnerSolveFailure { iteration: usize, source: Box<Error> },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("profile '{0}' is neither a readable file nor a valid expression")]
    ProfileNotFound(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGeometry(_) => "invalid-geometry",
            Error::SingularSystem(_) => "singular-system",
            Error::NearSingularOperator { .. } => "near-singular-operator",
            Error::NoConvergence { .. } => "no-convergence",
            Error::RangeEscape { .. } => "range-escape",
            Error::CriticalPointDetected { .. } => "critical-point-detected",
            Error::NotInFplus(_) => "not-in-Fplus",
            Error::AreaMismatch { .. } => "area-mismatch",
            Error::TrajectoryExit { .. } => "trajectory-exit",
            Error::NotTangent { .. } => "not-tangent",
            Error::NonpositiveFprime { .. } => "nonpositive-Fprime",
            Error::NotMonotone { .. } => "not-monotone",
            Error::DegenerateNorm(_) => "degenerate-norm",
            Error::SingularIdPlusK { .. } => "singular-Id-plus-K",
            Error::Diverged { .. } => "diverged",
            Error::InnerSolveFailure { .. } => "inner-solve-failure",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Parse(_) => "parse-error",
            Error::ProfileNotFound(_) => "profile-not-found",
            Error::Io(_) => "io-error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
