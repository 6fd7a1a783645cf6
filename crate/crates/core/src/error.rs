use thiserror::Error;

/// Failure modes shared by every solver in the crate.
///
/// The CLI maps `Parameter`/`Domain`/`Contract`/`Unsupported` to exit code 2
/// and everything else to exit code 1.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GluingError {
    /// Argument outside the mathematical domain of a formula (e.g. a
    /// fractional power of a negative number).
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation at the puncture.
    #[error("singular point: {0}")]
    SingularPoint(String),

    /// Parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Caller broke an operator's input contract (e.g. low modes passed to a
    /// high-mode operator).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("integration error: {0}")]
    Integration(String),

    /// Quadrature did not reach the requested accuracy.
    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("solver error: {0}")]
    Solver(String),

    /// A fixed-point iteration failed to contract.
    #[error("non-contraction in {block}: {detail} (iterate norms: {norms:?})")]
    NonContraction {
        block: String,
        detail: String,
        norms: Vec<f64>,
    },

    /// An iterate left the admissible parameter set.
    #[error("domain violation in {block}: {detail}")]
    DomainViolation { block: String, detail: String },

    #[error("unsupported parameters: {0}")]
    Unsupported(String),
}

impl GluingError {
    /// True for errors caused by bad input rather than a failing solve.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            GluingError::Domain(_)
                | GluingError::SingularPoint(_)
                | GluingError::Parameter(_)
                | GluingError::Contract(_)
                | GluingError::Unsupported(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, GluingError>;
