//! Symbolic abstract-index engine for conformal and tractor calculus, with an
//! independent jet oracle: the conformally invariant Yang–Mills-type
//! operator in dimension 6 and the obstruction tensor it contains.

pub mod canon;
pub mod coeff;
pub mod expr;
pub mod numeric;
pub mod parse;
pub mod print;
pub mod symbols;
pub mod reduce;
pub mod rules;
pub mod tractor;
pub mod forms;
pub mod hat;
pub mod obstruction;
pub mod verify;

pub use canon::{canonicalize, equivalent};
pub use coeff::Coeff;
pub use expr::{Expr, Factor, Index, Term};
pub use forms::FormExpr;
pub use numeric::spec::MetricSpec;
pub use parse::{parse, ParseError};
pub use rules::RuleSet;
pub use verify::{CheckReport, Certificate, Status};
