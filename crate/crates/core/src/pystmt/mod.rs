//! Statement-level view of a single Python function.
//!
//! A function is lexed into logical lines and segmented into an ordered list
//! of [`Statement`]s. The function name and the parameter list are the first
//! two statements; every other statement records the compound-statement
//! header that encloses it. Continuation clauses (`elif`, `else`, `except`,
//! `finally`) hang off the header they continue, so the parent chain of a
//! statement inside an `else:` runs through every `if`/`elif` of the chain.

mod defuse;
pub mod lexer;
mod segment;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

pub use defuse::{extract_def_use, statement_subtokens, statement_tokens};
pub use lexer::{Token, TokenKind};
pub use segment::{segment, segment_with_id};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: inconsistent use of tabs and spaces in indentation")]
    InconsistentIndentation { line: usize },
    #[error("line {line}: unterminated string literal")]
    UnterminatedString { line: usize },
    #[error("line {line}: bracket opened here is never closed")]
    UnterminatedBracket { line: usize },
    #[error("line {line}: closing bracket does not match")]
    UnbalancedBracket { line: usize },
    #[error("no function definition found")]
    NoFunction,
    #[error("line {line}: malformed function header")]
    MalformedHeader { line: usize },
    #[error("line {line}: expected an indented block")]
    ExpectedIndentedBlock { line: usize },
    #[error("line {line}: unexpected indent")]
    UnexpectedIndent { line: usize },
    #[error("line {line}: `{clause}` does not continue any open statement")]
    DanglingClause { line: usize, clause: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum StmtKind {
    FuncName,
    Params,
    If,
    Elif,
    Else,
    For,
    While,
    Try,
    Except,
    Finally,
    With,
    Assign,
    AugAssign,
    Return,
    Raise,
    Expr,
    Break,
    Continue,
    Pass,
    Import,
    Other,
}

impl StmtKind {
    /// Clauses that continue a preceding header at the same indentation.
    pub fn is_continuation(self) -> bool {
        matches!(self, StmtKind::Elif | StmtKind::Else | StmtKind::Except | StmtKind::Finally)
    }

    pub fn is_loop(self) -> bool {
        matches!(self, StmtKind::For | StmtKind::While)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Statement {
    /// 1-based position in the function.
    pub index: usize,
    pub kind: StmtKind,
    /// Index of the enclosing header, 0 for the function's top level.
    pub parent: usize,
    #[serde(rename = "tokens", serialize_with = "token_texts")]
    pub raw_tokens: Vec<Token>,
    pub defined_vars: BTreeSet<String>,
    pub used_vars: BTreeSet<String>,
    pub line: usize,
    /// Indentation column (tabs expanded to multiples of 8).
    #[serde(skip)]
    pub indent: usize,
}

fn token_texts<S: serde::Serializer>(tokens: &[Token], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(tokens.iter().map(|t| t.text.as_str()))
}

#[derive(Debug, Clone, Serialize)]
pub struct StatementTree {
    pub source_id: String,
    pub statements: Vec<Statement>,
}

impl StatementTree {
    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Statement by 1-based index.
    pub fn get(&self, index: usize) -> Option<&Statement> {
        index.checked_sub(1).and_then(|i| self.statements.get(i))
    }

    /// Enclosing headers of `index`, nearest first.
    pub fn ancestors(&self, index: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut p = self.get(index).map_or(0, |s| s.parent);
        while p != 0 {
            out.push(p);
            p = self.get(p).map_or(0, |s| s.parent);
        }
        out
    }

    /// Direct children of `index` (0 = top level) in source order.
    pub fn children(&self, index: usize) -> Vec<usize> {
        self.statements
            .iter()
            .filter(|s| s.parent == index && s.kind != StmtKind::FuncName && s.kind != StmtKind::Params)
            .map(|s| s.index)
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("statement tree serializes")
    }
}
