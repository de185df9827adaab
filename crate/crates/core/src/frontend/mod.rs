//! MiniSol frontend: lexing, parsing and pretty-printing.

pub mod ast;
mod lexer;
mod parser;
mod printer;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::*;
pub use printer::{print_expr, print_unit};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{path}:{line}:{column}: syntax error: expected {expected}, found {found}")]
    Syntax {
        path: String,
        line: u32,
        column: u32,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}:{column}: unsupported feature: {feature}")]
    Unsupported {
        path: String,
        line: u32,
        column: u32,
        feature: String,
    },
    #[error("{path}:{line}:{column}: duplicate {what}")]
    Duplicate {
        path: String,
        line: u32,
        column: u32,
        what: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl FrontendError {
    /// `(line, column)` of the error, when it has one.
    pub fn position(&self) -> Option<(u32, u32)> {
        match self {
            FrontendError::Syntax { line, column, .. }
            | FrontendError::Unsupported { line, column, .. }
            | FrontendError::Duplicate { line, column, .. } => Some((*line, *column)),
            FrontendError::Io { .. } => None,
        }
    }
}

/// Parses MiniSol source text into a [`SourceUnit`].
pub fn parse(source: &str, path: &str) -> Result<SourceUnit, FrontendError> {
    let mut parser = parser::Parser::new(source, path)?;
    let contracts = parser.parse_contracts()?;
    Ok(SourceUnit {
        path: path.to_string(),
        contracts,
        line_count: source.lines().count(),
    })
}

/// Reads and parses a file. The unit's `path` is the path as given.
pub fn parse_file(path: &Path) -> Result<SourceUnit, FrontendError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| FrontendError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    parse(&text, &shown)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Simple,
    Ordinary,
    Complex,
}

impl SizeClass {
    pub const ORDINARY_MIN_LINES: usize = 50;
    pub const ORDINARY_MAX_LINES: usize = 300;

    pub fn from_line_count(lines: usize) -> SizeClass {
        if lines < Self::ORDINARY_MIN_LINES {
            SizeClass::Simple
        } else if lines <= Self::ORDINARY_MAX_LINES {
            SizeClass::Ordinary
        } else {
            SizeClass::Complex
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SizeClass::Simple => "simple",
            SizeClass::Ordinary => "ordinary",
            SizeClass::Complex => "complex",
        }
    }
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn classify_size(unit: &SourceUnit) -> SizeClass {
    SizeClass::from_line_count(unit.line_count)
}
