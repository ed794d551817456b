use thiserror::Error;

use crate::arith::Rational;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("value not certified within level bound {0}")]
    LevelBoundExceeded(usize),

    #[error("residue mismatch at level {level}: expected {expected}, computed {computed}")]
    ResidueMismatch {
        level: usize,
        expected: Box<Rational>,
        computed: Box<Rational>,
    },

    #[error("verification failed [{identity}]: {detail}")]
    VerificationFailed { identity: String, detail: String },

    #[error("chart is not free")]
    NonFreeChart,

    #[error("obstruction present: t does not divide p_{0}")]
    ObstructionPresent(usize),

    #[error("step bound {0} exceeded")]
    StepBoundExceeded(usize),

    #[error("unit constant {0} has no rational root of order {1}")]
    UnitRootNotRational(Box<Rational>, u64),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precision(msg: impl Into<String>) -> Self {
        Error::PrecisionExhausted(msg.into())
    }

    pub(crate) fn verification(identity: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::VerificationFailed {
            identity: identity.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code for the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Domain(_) => 1,
            Error::VerificationFailed { .. }
            | Error::ResidueMismatch { .. }
            | Error::NonFreeChart
            | Error::ObstructionPresent(_)
            | Error::UnitRootNotRational(..) => 2,
            Error::PrecisionExhausted(_)
            | Error::LevelBoundExceeded(_)
            | Error::StepBoundExceeded(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "Domain",
            Error::PrecisionExhausted(_) => "PrecisionExhausted",
            Error::LevelBoundExceeded(_) => "LevelBoundExceeded",
            Error::ResidueMismatch { .. } => "ResidueMismatch",
            Error::VerificationFailed { .. } => "VerificationFailed",
            Error::NonFreeChart => "NonFreeChart",
            Error::ObstructionPresent(_) => "ObstructionPresent",
            Error::StepBoundExceeded(_) => "StepBoundExceeded",
            Error::UnitRootNotRational(..) => "UnitRootNotRational",
            Error::Parse(_) => "Parse",
        }
    }
}
