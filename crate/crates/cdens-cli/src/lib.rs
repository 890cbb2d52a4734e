//! Command-line front end: argument parsing, summary tables, machine-readable
//! output, and SVG plots on top of the `cdens` library.

pub mod args;
pub mod output;
pub mod run;
pub mod svg;

/// Process exit codes: flag problems, data problems, numerical failure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Ok = 0,
    Flags = 2,
    Data = 3,
    Numerical = 4,
}

/// An error carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn flags(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Flags,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Numerical,
            message: message.into(),
        }
    }
}

impl From<cdens::Error> for CliError {
    fn from(e: cdens::Error) -> Self {
        use cdens::Error::*;
        let kind = match &e {
            Io { .. } | Csv { .. } | MissingColumn { .. } | BadCell { .. } | InvalidData(_) => {
                ExitKind::Data
            }
            InvalidConfig(_) | NotImplemented(_) => ExitKind::Flags,
            InsufficientLocalData { .. } | Numerical(_) => ExitKind::Numerical,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
