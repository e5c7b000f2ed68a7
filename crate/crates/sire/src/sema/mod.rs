//! Name resolution, static checking and elaboration.

pub mod disjoint;
pub mod elab;
pub mod freevars;
pub mod resolve;
pub mod statics;

pub use disjoint::check_disjoint;
pub use resolve::{resolve, SymbolTable};
pub use statics::{check_static, Elaborated};

use crate::diag::Diagnostic;
use crate::frontend::ast::Program;

/// Run the full static pipeline: resolve, extent checking/elaboration and
/// the parallel disjointness check.
pub fn analyze(program: &Program) -> Result<Elaborated, Vec<Diagnostic>> {
    let table = resolve(program)?;
    let elaborated = check_static(program, &table)?;
    check_disjoint(&elaborated.program, &elaborated.free)?;
    Ok(elaborated)
}
