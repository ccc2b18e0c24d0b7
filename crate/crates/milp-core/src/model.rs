//! Problem description types: a linear program over bounded variables plus
//! optional semi-continuity marks (`x = 0` or `alpha <= x <= 1`).

use std::fmt;

/// Relational operator of a linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// `coeffs . x <= rhs`
    Le,
    /// `coeffs . x == rhs`
    Eq,
    /// `coeffs . x >= rhs`
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Le => write!(f, "<="),
            Relation::Eq => write!(f, "=="),
            Relation::Ge => write!(f, ">="),
        }
    }
}

/// One dense constraint row `coeffs . x (relation) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Marks variable `var` as semi-continuous: feasible values are
/// `{0} ∪ [threshold, upper bound]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiContinuity {
    pub var: usize,
    /// Minimum admissible nonzero value, in `(0, 1)`.
    pub threshold: f64,
}

/// Errors detected by [`MilpModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A constraint row has a different length than the variable count.
    DimensionMismatch { row: usize, len: usize, expected: usize },
    /// `lower > upper` for a variable.
    InvertedBounds { var: usize },
    /// A coefficient, objective entry or rhs is NaN (or an infinite
    /// coefficient, which has no sensible interpretation in a row).
    NonFiniteEntry { what: &'static str, index: usize },
    /// Semi-continuity mark references a variable out of range.
    VarOutOfRange { var: usize },
    /// Semi-continuity threshold outside `(0, 1)`, or the marked variable's
    /// bounds are not `[0, 1]`.
    BadSemiContinuity { var: usize },
    /// The same variable is marked semi-continuous twice.
    DuplicateSemiContinuity { var: usize },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::DimensionMismatch { row, len, expected } => write!(
                f,
                "constraint row {row} has {len} coefficients, expected {expected}"
            ),
            ModelError::InvertedBounds { var } => {
                write!(f, "variable {var} has lower bound above upper bound")
            }
            ModelError::NonFiniteEntry { what, index } => {
                write!(f, "non-finite {what} at index {index}")
            }
            ModelError::VarOutOfRange { var } => {
                write!(f, "variable index {var} out of range")
            }
            ModelError::BadSemiContinuity { var } => write!(
                f,
                "semi-continuous variable {var} needs bounds [0, 1] and a threshold in (0, 1)"
            ),
            ModelError::DuplicateSemiContinuity { var } => {
                write!(f, "variable {var} marked semi-continuous more than once")
            }
        }
    }
}

impl std::error::Error for ModelError {}

/// A minimization problem: `min c . x` subject to constraint rows, per-variable
/// bounds, and optional semi-continuity marks.
///
/// Bounds may be infinite (`f64::NEG_INFINITY` / `f64::INFINITY`). Variables
/// marked semi-continuous must have bounds exactly `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    num_vars: usize,
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    semi: Vec<SemiContinuity>,
}

impl MilpModel {
    /// Creates a model with `num_vars` variables, zero objective, no rows, and
    /// free bounds `(-inf, +inf)`.
    pub fn new(num_vars: usize) -> Self {
        MilpModel {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            semi: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    pub fn semi_continuities(&self) -> &[SemiContinuity] {
        &self.semi
    }

    /// Sets the objective coefficient of one variable.
    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    /// Replaces the whole objective vector. Panics if the length differs.
    pub fn set_objective_vec(&mut self, objective: Vec<f64>) {
        assert_eq!(objective.len(), self.num_vars, "objective length");
        self.objective = objective;
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Appends a dense constraint row and returns its index.
    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self.constraints.len() - 1
    }

    /// Marks `var` semi-continuous with the given minimum nonzero value.
    pub fn mark_semi_continuous(&mut self, var: usize, threshold: f64) {
        self.semi.push(SemiContinuity { var, threshold });
    }

    /// Removes every semi-continuity mark, leaving a plain LP.
    pub fn clear_semi_continuities(&mut self) {
        self.semi.clear();
    }

    /// Checks structural well-formedness (dimensions, bound ordering, finite
    /// entries, semi-continuity marks).
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.objective.len() != self.num_vars {
            return Err(ModelError::DimensionMismatch {
                row: usize::MAX,
                len: self.objective.len(),
                expected: self.num_vars,
            });
        }
        for (j, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(ModelError::NonFiniteEntry { what: "objective coefficient", index: j });
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != self.num_vars {
                return Err(ModelError::DimensionMismatch {
                    row: i,
                    len: row.coeffs.len(),
                    expected: self.num_vars,
                });
            }
            if row.coeffs.iter().any(|c| !c.is_finite()) {
                return Err(ModelError::NonFiniteEntry { what: "constraint coefficient", index: i });
            }
            if !row.rhs.is_finite() {
                return Err(ModelError::NonFiniteEntry { what: "constraint rhs", index: i });
            }
        }
        for j in 0..self.num_vars {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(ModelError::NonFiniteEntry { what: "bound", index: j });
            }
            if self.lower[j] > self.upper[j] {
                return Err(ModelError::InvertedBounds { var: j });
            }
        }
        let mut seen = vec![false; self.num_vars];
        for s in &self.semi {
            if s.var >= self.num_vars {
                return Err(ModelError::VarOutOfRange { var: s.var });
            }
            if seen[s.var] {
                return Err(ModelError::DuplicateSemiContinuity { var: s.var });
            }
            seen[s.var] = true;
            let bounds_ok = self.lower[s.var] == 0.0 && self.upper[s.var] == 1.0;
            if !bounds_ok || !(s.threshold > 0.0 && s.threshold < 1.0) {
                return Err(ModelError::BadSemiContinuity { var: s.var });
            }
        }
        Ok(())
    }

    /// Renders the model as a plain-text listing, one constraint per line.
    /// Intended for debugging, not for round-tripping.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::new();
        out.push_str("min:");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                out.push_str(&format!(" {:+} x{}", c, j));
            }
        }
        out.push('\n');
        for (i, row) in self.constraints.iter().enumerate() {
            out.push_str(&format!("r{}:", i));
            let mut any = false;
            for (j, c) in row.coeffs.iter().enumerate() {
                if *c != 0.0 {
                    out.push_str(&format!(" {:+} x{}", c, j));
                    any = true;
                }
            }
            if !any {
                out.push_str(" 0");
            }
            out.push_str(&format!(" {} {}\n", row.relation, row.rhs));
        }
        for j in 0..self.num_vars {
            out.push_str(&format!("b{}: {} <= x{} <= {}\n", j, self.lower[j], j, self.upper[j]));
        }
        for s in &self.semi {
            out.push_str(&format!("s{}: x{} in {{0}} u [{}, 1]\n", s.var, s.var, s.threshold));
        }
        out
    }
}
