use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbqError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("evaluation budget exceeded: {evaluations} evaluations requested, limit is {limit}")]
    BudgetExceeded { evaluations: u128, limit: u128 },

    #[error("{transform} transform: value {value} outside its domain ({detail})")]
    TransformDomain {
        transform: &'static str,
        value: f64,
        detail: &'static str,
    },

    #[error("exponential saturation at argument {0}")]
    Saturation(f64),

    #[error("numerical degradation: posterior variance {value:e} below tolerance (jitter used {jitter:e})")]
    NumericalDegradation { value: f64, jitter: f64 },

    #[error(
        "linear dependence: posterior variance {variance:e} at or below threshold {threshold:e}"
    )]
    LinearDependence { variance: f64, threshold: f64 },

    #[error("weak adaptivity violated: {0}")]
    WeakAdaptivityViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Gram matrix singular after {attempts} jitter doublings (last jitter {jitter:e})")]
    SingularGram { attempts: u32, jitter: f64 },

    #[error("rate prediction vacuous: smoothness {r} does not exceed d/2 = {half_d}")]
    VacuousRate { r: f64, half_d: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AbqError {
    fn from(e: std::io::Error) -> Self {
        AbqError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AbqError>;

impl AbqError {
    /// Process exit status: 2 for configuration problems, 3 for numerical
    /// aborts, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            AbqError::Config(_)
            | AbqError::InvalidArgument(_)
            | AbqError::InvalidDomain(_)
            | AbqError::VacuousRate { .. } => 2,
            AbqError::Io(_) => 1,
            _ => 3,
        }
    }
}
