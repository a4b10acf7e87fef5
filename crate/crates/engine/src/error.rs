use std::fmt;

use vquel_frontend::ast::Span;

/// Runtime evaluation error with the source position that caused it.
#[derive(Debug, Clone)]
pub struct EngineError {
    pub message: String,
    pub span: Option<Span>,
}

impl EngineError {
    pub fn new(message: impl Into<String>, span: Span) -> EngineError {
        EngineError { message: message.into(), span: Some(span) }
    }

    pub fn plain(message: impl Into<String>) -> EngineError {
        EngineError { message: message.into(), span: None }
    }
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(span) => write!(f, "{span}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for EngineError {}
