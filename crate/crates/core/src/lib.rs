//! Solvers for systems of mixed least/greatest fixpoint equations over
//! finite lattices.
//!
//! The central object is an [`eqsys::EquationSystem`]: an ordered list of
//! equations `x_i =_{mu|nu} f_i(x_1, ..., x_m)` over a lattice, solved
//! innermost-first with the rightmost equation outermost. Three routes to
//! the solution are provided:
//!
//! * [`eqsys::solve_kleene`] — the nested Kleene iteration, used as the
//!   ground-truth oracle;
//! * [`game`] — a parity game between an existential and a universal player
//!   whose winning regions characterise the solution;
//! * [`pm`] — progress measures computed as the least fixpoint of a system
//!   of equations over truncated ordinal vectors, driven by a worklist over
//!   a dependency graph of symbolic moves.
//!
//! Frontends translate verification problems into equation systems:
//! [`mucalc`] (μ-calculus over Kripke structures), [`latticed`]
//! (multi-valued μ-calculi over finite distributive truth lattices),
//! [`cpflow`] (constant propagation for a small while language) and
//! [`smtreal`] (equations over the real interval [0,1], compiled to
//! SMT-LIB scripts).

pub mod cpflow;
pub mod eqsys;
pub mod error;
pub mod game;
pub mod lattice;
pub mod latticed;
pub mod mucalc;
pub mod pm;
pub mod smtreal;

pub use error::Error;
pub use lattice::{Lattice, Lifted, OrdinalVector};
pub use eqsys::{EquationSystem, Sign, Term};
