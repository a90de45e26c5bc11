//! Tokenizer, recursive-descent parser, and canonical printer for the SQL
//! subset used by the benchmark corpora: single-direction ORDER BY, HAVING
//! only after GROUP BY, JOIN .. ON chains, nested queries in FROM/WHERE/HAVING,
//! and set operators at the top level of any (sub)query.
//!
//! The canonical form lowercases keywords and identifiers, separates tokens
//! with single spaces (qualified columns like `t1.name` stay one token), and
//! preserves string literal and number contents byte-exact.

mod ast;
mod parser;
mod printer;
mod token;

pub use ast::{
    AggArg, AggregateFn, ArithOp, ColumnRef, CompareOp, Comparison, ConditionTree, FromClause,
    Join, JoinCondition, Literal, Operand, OrderDirection, OrderSpec, RightOperand, SelectClause,
    SelectItem, SetOperator, SqlQuery, TableSource, ValueExpr,
};
pub use parser::parse_query;
pub use printer::{
    print_canonical, print_condition, print_from_body, print_group_by_body, print_having_body,
    print_limit_body, print_order_by_body, print_select_body, print_set_tail, print_value_expr,
    print_where_body,
};
pub use token::{tokenize, Keyword, Token, TokenKind};

use thiserror::Error;

/// Errors raised while tokenizing or parsing SQL text. Offsets are byte
/// positions into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("unterminated string literal starting at byte {offset}")]
    UnterminatedString { offset: usize },
    #[error("illegal character {ch:?} at byte {offset}")]
    IllegalCharacter { ch: char, offset: usize },
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { message: String, offset: usize },
    #[error("unsupported construct at byte {offset}: {construct}")]
    Unsupported { construct: String, offset: usize },
}

/// Parse then reprint. Idempotent: canonical text parses back to the same AST.
pub fn canonicalize(text: &str) -> Result<String, SqlError> {
    Ok(print_canonical(&parse_query(text)?))
}
