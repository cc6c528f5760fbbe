//! Syntax: AST, parsing, printing, substitution, normalization.

pub mod ast;
pub mod norm;
pub mod parser;
pub mod print;
pub mod sexpr;
pub mod subst;
