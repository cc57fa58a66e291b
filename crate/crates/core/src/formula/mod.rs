//! Weighted truncated temporal logic over finite traces.
//!
//! Formulas are parsed from text ([`parse`]) and evaluated over a
//! [`Trace`](crate::trace::Trace) under three semantics:
//!
//! * [`satisfies`]: boolean satisfaction.
//! * [`robustness`]: signed degree of satisfaction with weighted
//!   conjunction/disjunction aggregators. Strictly positive implies
//!   satisfaction, strictly negative implies violation.
//! * [`smooth_robustness`]: the same recursion with every `min`/`max`
//!   replaced by [`smooth_min`]/[`smooth_max`]. For formulas in negation
//!   normal form it never exceeds [`robustness`].
//!
//! Predicates are resolved by name and arity against a
//! [`PredicateRegistry`] when a formula is evaluated, not when it is parsed.

mod ast;
mod parser;
mod registry;
mod semantics;
mod smooth;

pub use ast::{Arg, Comparison, Formula, Predicate};
pub use parser::{parse, parse_with_weights};
pub use registry::{PredicateRegistry, StateFn};
pub use semantics::{robustness, satisfies, smooth_robustness, weighted_and, weighted_or, Monitor};
pub use smooth::{smooth_max, smooth_min, SmoothingParams, DEFAULT_RHO_MAX};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: expected one of {}, found {found}", expected.join(", "))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("weights must be positive and finite, got {value}")]
    NonPositiveWeight { value: f64 },
    #[error("arity mismatch: {message}")]
    Arity { message: String },
    #[error("unknown weight name `{name}`")]
    UnknownWeight { name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no predicate `{name}` with {arity} argument(s) is registered")]
    UnknownPredicate { name: String, arity: usize },
    #[error("predicate `{name}`: {reason}")]
    BadPredicate { name: String, reason: String },
    #[error("cannot aggregate an empty list of values")]
    EmptyAggregation,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid formula: {0}")]
    InvalidFormula(#[from] ParseError),
    #[error("trace has dimension {found} but the monitor was built for {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}
