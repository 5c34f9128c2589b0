//! Scenario-based programming runtime in which scenario objects emit
//! labeled constraint formulas and embedded solvers construct the composite
//! event that drives them forward.

pub mod engine;
pub mod formal;
pub mod formula;
pub mod lp;
pub mod maxsat;
pub mod models;
pub mod sat;
pub mod semantics;
pub mod sexp;
pub mod smt;
pub mod trace;
