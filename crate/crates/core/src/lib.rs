//! Learning movement primitives that satisfy weighted temporal-logic tasks.
//!
//! - [`formula`]: weighted truncated LTL, its parser and three semantics.
//! - [`dmp`]: multi-dimensional dynamic movement primitives.
//! - [`optimizer`]: black-box policy improvement driven by a formula cost.
//! - [`scenarios`]: planar regions, obstacles and the reference tasks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dmp;
pub mod export;
pub mod formula;
pub mod optimizer;
pub mod scenarios;
pub mod trace;
