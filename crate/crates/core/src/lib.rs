//! I/O lower bounds for disjoint-array-access programs, red-blue pebbling
//! oracles, and 2.5D LU/Cholesky with exact communication accounting on a
//! simulated distributed machine.

pub mod bounds;
pub mod costmodels;
pub mod daap;
pub mod factor;
pub mod matrix;
pub mod pebble;
pub mod simnet;

pub use bounds::{parallel_bound, program_bound, BoundError, BoundReport};
pub use costmodels::{model_words, ModelId, ModelValue};
pub use daap::{build_cdag, parse_daap, Cdag, CdagError, DaapProgram, ParseError};
pub use factor::{confchox, conflux, FactorConfig, FactorError, FactorKind, FactorResult, PivotRecord};
pub use matrix::{DenseMatrix, MatrixError};
pub use pebble::{FormatError, OracleError, ScheduleError};
pub use simnet::{CommStats, GridSpec, SimConfig, SimError};

/// Any failure surfaced by the library, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Resource(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// 2 parse (unreadable input files included), 3 numeric or domain,
    /// 4 resource cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Io(_) => 2,
            Error::Domain(_) => 3,
            Error::Resource(_) => 4,
        }
    }
}

impl From<ParseError> for Error {
    fn from(e: ParseError) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<FormatError> for Error {
    fn from(e: FormatError) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<costmodels::UnknownModel> for Error {
    fn from(e: costmodels::UnknownModel) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<BoundError> for Error {
    fn from(e: BoundError) -> Self {
        Error::Domain(e.to_string())
    }
}

impl From<ScheduleError> for Error {
    fn from(e: ScheduleError) -> Self {
        Error::Domain(e.to_string())
    }
}

impl From<CdagError> for Error {
    fn from(e: CdagError) -> Self {
        match e {
            CdagError::TooLarge { .. } => Error::Resource(e.to_string()),
            e => Error::Domain(e.to_string()),
        }
    }
}

impl From<OracleError> for Error {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Infeasible => Error::Domain(e.to_string()),
            e => Error::Resource(e.to_string()),
        }
    }
}

impl From<SimError> for Error {
    fn from(e: SimError) -> Self {
        match e {
            SimError::MemoryExceeded { .. } => Error::Resource(e.to_string()),
            e => Error::Domain(e.to_string()),
        }
    }
}

impl From<FactorError> for Error {
    fn from(e: FactorError) -> Self {
        match e {
            FactorError::Sim(s) => s.into(),
            e => Error::Domain(e.to_string()),
        }
    }
}

impl From<MatrixError> for Error {
    fn from(e: MatrixError) -> Self {
        Error::Parse(e.to_string())
    }
}
