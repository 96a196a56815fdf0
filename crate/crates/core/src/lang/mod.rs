//! The `.qps` language: lexer, parser, syntax tree, printer and checker.

pub mod ast;
pub mod check;
pub mod diag;
pub mod lexer;
pub mod parser;
pub mod pretty;

pub use ast::Program;
pub use check::{check_modes, check_program, check_reversible, BlockKind, Mode, ModeState};
pub use diag::{has_errors, Code, Diagnostic, Span};
pub use parser::parse;
pub use pretty::pretty_print;

/// Parses and checks `src`. Errors (not warnings) make this fail; the
/// returned list holds every diagnostic either way.
pub fn load(src: &str) -> Result<(Program, Vec<Diagnostic>), Vec<Diagnostic>> {
    let program = parse(src).map_err(|d| vec![d])?;
    let diags = check_program(&program);
    if has_errors(&diags) {
        Err(diags)
    } else {
        Ok((program, diags))
    }
}
