use std::fmt;

use super::walk::OpPath;
use crate::textio::SourceSpan;

/// A located problem report from the verifier, a pass, or the emitter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: Option<OpPath>,
    pub span: Option<SourceSpan>,
    pub message: String,
}

impl Diagnostic {
    pub fn new(message: impl Into<String>) -> Self {
        Diagnostic {
            path: None,
            span: None,
            message: message.into(),
        }
    }

    pub fn at(path: &OpPath, span: Option<SourceSpan>, message: impl Into<String>) -> Self {
        Diagnostic {
            path: Some(path.clone()),
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.span, &self.path) {
            (Some(span), _) => write!(f, "{}:{}: {}", span.line, span.column, self.message),
            (None, Some(path)) => write!(f, "op {path}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for Diagnostic {}
