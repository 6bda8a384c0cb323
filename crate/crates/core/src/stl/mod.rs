//! Signal temporal logic with aggregate window atoms.

mod ast;
mod monitor;
mod parser;

pub use ast::{Aggregate, BindError, Comparison, Formula, Interval, Term};
pub use monitor::{eval_bool, eval_robust, EvalError, Monitor, LARGE};
pub use parser::{parse, parse_parametric, parse_with, Mode, ParseError};
