//! MiniOO lexing, parsing and printing.
//!
//! The grammar is documented in `docs/grammar.md` at the repository root.

pub mod ast;
mod lexer;
mod parser;
mod pretty;

use thiserror::Error;

pub use ast::*;
pub use lexer::{lex, Token, TokenKind};
pub use parser::Parser;
pub use pretty::{print_expr, print_unit};

/// One input file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceUnit { path: path.into(), text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{span}: lexical error: {message}")]
    Lex { span: Span, message: String },
    #[error("{span}: syntax error: {message}")]
    Parse { span: Span, message: String },
}

impl FrontendError {
    pub fn span(&self) -> Span {
        match self {
            FrontendError::Lex { span, .. } | FrontendError::Parse { span, .. } => *span,
        }
    }
}

/// Parses a token sequence produced by [`lex`].
pub fn parse(tokens: &[Token], path: &str) -> Result<CompilationUnit, FrontendError> {
    Parser::new(tokens).parse_unit(path)
}

/// Parses an attribute starting at the `[` token.
pub fn parse_attribute(tokens: &[Token]) -> Result<AttributeSpec, FrontendError> {
    Parser::new(tokens).attribute()
}

pub fn parse_source(path: &str, text: &str) -> Result<CompilationUnit, FrontendError> {
    let tokens = lex(text)?;
    parse(&tokens, path)
}

pub fn parse_unit(unit: &SourceUnit) -> Result<CompilationUnit, FrontendError> {
    parse_source(&unit.path, &unit.text)
}
