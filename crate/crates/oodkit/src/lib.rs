//! File formats, configuration, reports and the `oodkit` command line on
//! top of `oodkit-core`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod format;
pub mod report;

use std::fmt;

use oodkit_core::Error as CoreError;

use crate::format::StoreError;

/// Exit code for invalid input: bad files, shapes, flags or config.
pub const EXIT_INPUT: i32 = 2;
/// Exit code for numerical failures such as a singular covariance.
pub const EXIT_NUMERICAL: i32 = 3;

/// A failure carrying the process exit code it maps to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_NUMERICAL,
            message: message.into(),
        }
    }

    pub fn from_core(e: CoreError) -> Self {
        if e.is_numerical() {
            CliError::numerical(e.to_string())
        } else {
            CliError::input(e.to_string())
        }
    }

    pub fn context(mut self, ctx: &str) -> Self {
        self.message = format!("{ctx}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Invalid { source, .. } if source.is_numerical() => {
                CliError::numerical(source.to_string())
            }
            other => CliError::input(other.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::from_core(e)
    }
}
