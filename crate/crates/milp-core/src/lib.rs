//! A small, self-contained, deterministic solver for linear programs with
//! semi-continuous variables (`x = 0` or `threshold <= x <= 1`), the shape
//! that charging-load scheduling produces.
//!
//! The LP engine is a bounded-variable two-phase primal simplex with fixed
//! smallest-index tie-breaking and a Bland's-rule fallback against cycling.
//! Semi-continuity is handled by best-first branch-and-bound over the
//! on/off disjunction of each marked variable — no auxiliary binaries, no
//! external solver, no randomization. Identical inputs produce bit-identical
//! solutions.
//!
//! Feasibility of returned solutions is honored to an absolute tolerance of
//! `1e-9` per row/bound; branch-and-bound terminates at a relative
//! optimality gap of `1e-6`.

mod simplex;

pub mod model;
pub mod solver;

pub use model::{Constraint, MilpModel, ModelError, Relation, SemiContinuity};
pub use solver::{
    check_solution, max_violation, solve_lp, solve_semi_continuous, MilpSolution, SolveLimits,
    SolveStatus, Violation, ViolationKind, FEASIBILITY_TOL, GAP_TOL, SEMI_TOL,
};
