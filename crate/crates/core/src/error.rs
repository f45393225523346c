use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("argument outside the domain of {function}: {detail}")]
    Domain { function: &'static str, detail: String },

    #[error("precision {0} bits is below the minimum of 64 bits")]
    Precision(u32),

    #[error("a = {a}: a^2 - 4 = {value} is not square-free")]
    NotSquareFree { a: i64, value: i64 },

    #[error("a = {0} is even, so a^2 - 4 is divisible by 4")]
    EvenDigit(i64),

    #[error("digit a = {0} must be at least 3")]
    DigitTooSmall(i64),

    #[error("element {0} is not an algebraic integer")]
    NonIntegral(String),

    #[error("conductor is zero")]
    ZeroConductor,

    #[error("conductor {0} is a unit")]
    UnitConductor(String),

    #[error("order of the unit exceeds the search bound {0}")]
    Overflow(u64),

    #[error("step map did not return to the initial pair after {0} steps")]
    PeriodMismatch(u64),

    #[error("|q| = {0} is too close to 1 for the working precision")]
    QTooClose(String),

    #[error("product did not converge: {0}")]
    NonConvergent(String),

    #[error("limit evaluation converged too slowly: {0}")]
    SlowConvergence(String),

    #[error("expression requires a rational conductor m, got {0}")]
    ConductorNotRational(String),

    #[error("k-truncation tail bound {bound} exceeds tolerance {tol}")]
    TailTooLarge { bound: String, tol: String },

    #[error("precision {have} bits is insufficient, need at least {need}")]
    InsufficientPrecision { have: u32, need: u32 },

    #[error("Moebius transformation hits its pole")]
    SingularPoint,

    #[error("computation needs {needed} factors, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },

    #[error("parse error at column {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Whether the error comes from bad input rather than from a computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Precision(_)
                | Error::NotSquareFree { .. }
                | Error::EvenDigit(_)
                | Error::DigitTooSmall(_)
                | Error::NonIntegral(_)
                | Error::ZeroConductor
                | Error::UnitConductor(_)
                | Error::ConductorNotRational(_)
                | Error::Parse { .. }
                | Error::InvalidArgument(_)
        )
    }

    /// Process exit code: 2 for input errors, 3 for numeric ones.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            3
        }
    }
}
