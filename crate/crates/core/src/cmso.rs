//! CMSO formulas: syntax, evaluation, and compilation of grammars into
//! defining sentences.

pub mod build;
pub mod eval;
pub mod formula;
pub mod mso;

pub use build::{
    build_context, build_from_regular_tree, build_from_tree_verifiable, BuildContext, BuildError,
};
pub use eval::{eval, Checker, Elem, EvalError, Valuation};
pub use formula::{parse_formula, print_formula, Formula, FormulaError, F};
pub use mso::{to_mso, MsoError};
