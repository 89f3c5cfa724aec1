//! Consultation queries over the archive with ontology subsumption.
//!
//! `has` tests literal membership of a value; `isa` expands a concept to all
//! of its (transitive) instances first. See [`parser`] for the grammar.

mod ast;
mod eval;
pub mod parser;

use thiserror::Error;

use crate::store::StoreError;

pub use ast::{Atom, CmpOp, Expr, Query};
pub use eval::{
    evaluate, explain, matches, AtomExplanation, EvalMode, Explanation, Projection,
    QueryResult, QueryStats, ServedBy,
};
pub use parser::parse_query;

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: expected {}, found {found}", .expected.join(" or "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unknown parameter `{name}` at {line}:{column}")]
    UnknownParameter { name: String, line: usize, column: usize },
    #[error("no concept or instance matches `{0}`")]
    UnknownConcept(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl QueryError {
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::Syntax { .. } => "syntax-error",
            QueryError::UnknownParameter { .. } => "unknown-parameter",
            QueryError::UnknownConcept(_) => "unknown-concept",
            QueryError::Store(e) => e.code(),
        }
    }
}
