//! The `.cms` conceptual-model language: lexing, parsing, printing and
//! validation.

pub mod ast;
mod lexer;
mod parser;
mod pretty;
mod validate;

use serde::Serialize;

pub use parser::parse_program;
pub use pretty::pretty_print;
pub use validate::validate;

use crate::model::{ConceptualModel, Query};

/// Byte range plus the 1-based line/column of its first byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiagnosticKind {
    // parse
    UnexpectedToken,
    UnterminatedString,
    DuplicateDeclaration,
    UnknownKeyword,
    // validation
    UnknownVariable,
    UnknownUnit,
    InvalidCardinality,
    DuplicateLevel,
    ComparisonTypeMismatch,
    ComparisonVariableMismatch,
    MissingQuery,
    MultipleQueries,
    QueryWithoutRelationship,
    SelfRelationship,
    DuplicateRelationship,
    DuplicateInteractionVariable,
    InteractionArity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(kind: DiagnosticKind, span: Span, message: impl Into<String>) -> Self {
        Diagnostic { kind, span, message: message.into() }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: error: {}", self.span.line, self.span.col, self.message)
    }
}

/// Parse then validate.
pub fn compile_source(src: &str) -> Result<(ConceptualModel, Query), Vec<Diagnostic>> {
    validate(&parse_program(src)?)
}
