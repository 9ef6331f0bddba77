use std::path::PathBuf;

use thiserror::Error;

use crate::fitting::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A distribution parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A function argument is outside the function's domain.
    #[error("{function}: argument {value} outside domain ({expected})")]
    Domain {
        function: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A datum is not in the support of the family being fitted or tested.
    #[error("datum #{index} = {value} is invalid: {reason}")]
    Data {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// The solver ran out of iterations. Carries the last iterate.
    #[error("{} fit did not converge after {} iterations (gradient norm {:e})", .0.spec.family().name(), .0.iterations, .0.gradient_norm)]
    NoConvergence(Box<FitResult>),

    #[error("root bracket exhausted: {0}")]
    Bracket(String),

    /// The variance function must reproduce the population variance at the
    /// population mean.
    #[error("variance function gives {got} at the mean but the population variance is {expected}")]
    ModelInconsistency { got: f64, expected: f64 },

    #[error("binning: {0}")]
    Binning(String),

    #[error("{0} is not supported for this family")]
    Unsupported(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: PathBuf },

    #[error("{path}: column `{column}` not found (available: {available})")]
    MissingColumn {
        path: PathBuf,
        column: String,
        available: String,
    },

    /// `row` counts data records from 1; `line` is the physical line in the file.
    #[error("{path}: data row {row} (line {line}): cannot parse `{cell}` as a finite number")]
    ParseCell {
        path: PathBuf,
        row: usize,
        line: u64,
        cell: String,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    /// Configuration errors name the offending key.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
}

impl Error {
    pub(crate) fn domain(function: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            function,
            value,
            expected,
        }
    }
}
