//! Lexing, parsing and pretty-printing of `.sire` sources.

pub mod ast;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod token;

pub use ast::Program;
pub use lexer::tokenize;
pub use parser::{parse, parse_source};
pub use pretty::print_program;
