//! Position-carrying frontend errors.

use std::fmt;

use thiserror::Error;

use crate::ast::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

/// Lexical, syntactic, or semantic issue at a source position.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{span}: {severity}: {message}")]
pub struct FrontendError {
    pub severity: Severity,
    pub message: String,
    pub span: Span,
}

impl FrontendError {
    pub fn error(message: impl Into<String>, span: Span) -> FrontendError {
        FrontendError { severity: Severity::Error, message: message.into(), span }
    }

    pub fn warning(message: impl Into<String>, span: Span) -> FrontendError {
        FrontendError { severity: Severity::Warning, message: message.into(), span }
    }
}
