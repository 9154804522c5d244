use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown token `{0}`")]
    UnknownToken(String),

    #[error("no distribution for context {0} and no fallback declared")]
    UndefinedContext(String),

    #[error("safe set is empty")]
    EmptySafeSet,

    #[error("safe mass is zero; restricted distribution is undefined")]
    DegenerateSupport,

    #[error("enumeration needs {required} sequences, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("every pipeline stage has zero service time")]
    AllZero,

    #[error("validation failed at {field}: {message}")]
    Validation { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("retriever failure: {0}")]
    Retriever(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
