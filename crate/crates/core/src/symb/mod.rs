//! Minimal symbolic engine: expression trees over chart coordinates with
//! exact differentiation, a simplifying normal form, numeric evaluation and
//! an infix parser.

mod diff;
mod display;
mod eval;
mod expr;
mod num;
mod parse;
mod simplify;

pub use display::Pretty;
pub use eval::{Evaluator, Program};
pub use expr::{Expr, Node};
pub use num::Num;
pub use parse::{parse, parse_raw};

#[cfg(test)]
mod props;
