//! The rule language: AST, parser, canonical printer and admissibility
//! analysis for the supported fragment (stratified, non-recursive rules plus
//! even loops that stand for abducible choices).

mod ast;
mod check;
mod parser;
mod program;

pub use ast::*;
pub use check::{check_program, Analysis};
pub use parser::{parse_items, parse_program, parse_query};
pub use program::{print_program, print_rules, Program};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("recursion through {cycle} is not supported (in `{clause}`)")]
    Recursion { clause: String, cycle: String },
    #[error("variable `{var}` in `{clause}` is not range-restricted")]
    NotRangeRestricted { clause: String, var: String },
    #[error("predicate {pred} is declared abducible more than once")]
    DuplicateAbducible { pred: String },
    #[error("undeclared feature `{feature}` referenced by `{context}`")]
    UndeclaredFeature { feature: String, context: String },
    #[error("feature `{feature}` must be {expected} (in `{context}`)")]
    FeatureKind { feature: String, expected: &'static str, context: String },
    #[error("`{value}` is not in the domain of `{feature}` (in `{context}`)")]
    DomainValue { feature: String, value: String, context: String },
    #[error("directive `{directive}`: {msg}")]
    Directive { directive: String, msg: String },
}
