//! Command-line errors: a stable kind string, a message and an exit code.

use std::fmt;
use std::path::Path;

use sgboost_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Bad input or flags; exit code 2.
    Validation,
    /// Numeric or I/O failure after validation; exit code 1.
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub severity: Severity,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn validation(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Validation,
            kind,
            message: message.into(),
        }
    }

    pub fn runtime(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Runtime,
            kind,
            message: message.into(),
        }
    }

    pub fn input(path: &Path, e: impl fmt::Display) -> Self {
        Self::validation("input", format!("{}: {e}", path.display()))
    }

    pub fn output(path: &Path, e: impl fmt::Display) -> Self {
        Self::runtime("output", format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self.severity {
            Severity::Validation => 2,
            Severity::Runtime => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // one line, even if a message carries newlines
        let msg = self.message.replace('\n', " ");
        write!(f, "error: {}: {}", self.kind, msg)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::SingularBlock => "singular_block",
            Error::EmptyBlock => "empty_block",
            Error::InfeasibleDf { .. } => "infeasible_df",
            Error::InvalidColumn(_) => "invalid_column",
            Error::UnsortedColumns => "unsorted_columns",
            Error::MissingOutcome(_) => "missing_outcome",
            Error::NonNumericColumn { .. } => "non_numeric_column",
            Error::ConstantColumn(_) => "constant_column",
            Error::UnknownVariable(_) => "unknown_variable",
            Error::OverlappingGroups(_) => "overlapping_groups",
            Error::NotBinary(_) => "not_binary",
            Error::NoLearners => "no_learners",
            Error::InvalidConfig(_) => "invalid_config",
            Error::OutOfRange { .. } => "out_of_range",
            Error::EmptyModel => "empty_model",
            Error::FoldTooSmall(_) => "fold_too_small",
        };
        let severity = match e {
            Error::SingularBlock | Error::EmptyBlock | Error::UnsortedColumns => Severity::Runtime,
            _ => Severity::Validation,
        };
        Self {
            severity,
            kind,
            message: e.to_string(),
        }
    }
}
