use std::fmt::Debug;
use std::path::Path;

use retouch_core::codec::CodecIoError;
use retouch_core::metrics::MetricError;
use retouch_core::puzzles::dataset::DatasetError;
use retouch_core::puzzles::PuzzleError;
use retouch_core::{ImageError, OpError, PlanError};
use retouch_oracle::OracleError;
use thiserror::Error;

/// Which exit status an error maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Service,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Validation => 2,
            ErrorClass::Service => 3,
            ErrorClass::Io => 4,
        }
    }
}

/// A typed failure: `kind` is the name of the underlying error variant
/// (e.g. `UnknownOp`), `hint` an optional next step for the user.
#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub class: ErrorClass,
    pub kind: String,
    pub message: String,
    pub hint: Option<String>,
}

/// Variant name from a derived `Debug` rendering.
fn variant(e: &impl Debug) -> String {
    let s = format!("{e:?}");
    s.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("").to_string()
}

impl CliError {
    pub fn new(class: ErrorClass, kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            class,
            kind: kind.into(),
            message: message.into(),
            hint: None,
        }
    }

    pub fn validation(kind: &str, message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Validation, kind, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(ErrorClass::Io, "Io", format!("{}: {e}", path.display()))
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }

    pub fn exit_code(&self) -> u8 {
        self.class.exit_code()
    }

    fn typed(class: ErrorClass, e: &(impl Debug + std::fmt::Display)) -> Self {
        Self::new(class, variant(e), e.to_string())
    }
}

impl From<PlanError> for CliError {
    fn from(e: PlanError) -> Self {
        Self::typed(ErrorClass::Validation, &e)
    }
}

impl From<OpError> for CliError {
    fn from(e: OpError) -> Self {
        match e {
            OpError::Image(e) => e.into(),
            e => Self::typed(ErrorClass::Validation, &e),
        }
    }
}

impl From<ImageError> for CliError {
    fn from(e: ImageError) -> Self {
        Self::typed(ErrorClass::Validation, &e)
    }
}

impl From<CodecIoError> for CliError {
    fn from(e: CodecIoError) -> Self {
        match e {
            CodecIoError::Image(e) => e.into(),
            e @ CodecIoError::Io(..) => Self::new(ErrorClass::Io, "Io", e.to_string()),
        }
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        Self::typed(ErrorClass::Validation, &e)
    }
}

impl From<PuzzleError> for CliError {
    fn from(e: PuzzleError) -> Self {
        match e {
            PuzzleError::Op(e) => e.into(),
            PuzzleError::Metric(e) => e.into(),
            e @ PuzzleError::MissingImage(_) => Self::typed(ErrorClass::Io, &e),
            e => Self::typed(ErrorClass::Validation, &e),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Puzzle(e) => e.into(),
            e @ (DatasetError::Io { .. } | DatasetError::SinkFull(_)) => Self::typed(ErrorClass::Io, &e),
            e => Self::typed(ErrorClass::Validation, &e),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Plan(e) => e.into(),
            e @ OracleError::Io { .. } => Self::typed(ErrorClass::Io, &e),
            e @ (OracleError::InvalidRequest(_) | OracleError::MissingSlot { .. } | OracleError::GroundTruthLeak(_)) => {
                Self::typed(ErrorClass::Validation, &e)
            }
            e => Self::typed(ErrorClass::Service, &e),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::new(ErrorClass::Validation, "SchemaError", e.to_string())
    }
}
