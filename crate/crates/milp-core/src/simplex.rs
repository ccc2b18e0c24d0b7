//! Bounded-variable two-phase primal simplex on a dense tableau.
//!
//! Deterministic by construction: entering/leaving selection uses fixed
//! smallest-index tie-breaking, Bland's rule engages after a run of
//! degenerate pivots, and nothing is randomized or hashed.

use crate::model::{Constraint, Relation};

/// Absolute slack allowed when judging a value against a bound or row.
pub(crate) const FEAS_EPS: f64 = 1e-9;
/// Reduced-cost threshold below which a column is not considered improving.
const COST_EPS: f64 = 1e-9;
/// Smallest tableau entry usable as a pivot / ratio-test denominator.
const PIVOT_EPS: f64 = 1e-9;
/// A step no longer than this counts as degenerate.
const DEGEN_STEP: f64 = 1e-10;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_TRIGGER: u32 = 100;
/// Residual above which the basis is re-solved from scratch at extraction.
const REFRESH_RESIDUAL: f64 = 1e-11;

#[derive(Debug)]
pub(crate) enum LpOutcome {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

/// Borrowed view of an LP in the shape the simplex consumes.
pub(crate) struct LpInput<'a> {
    pub objective: &'a [f64],
    pub constraints: &'a [Constraint],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

pub(crate) fn solve_lp_dense(input: &LpInput) -> LpOutcome {
    Simplex::new(input).run()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic with both bounds infinite; rests at zero.
    Free,
}

/// Outcome of the ratio test: what limited the entering variable's step.
enum StepLimit {
    /// The entering variable reached its opposite bound (bound flip).
    Entering,
    /// Basic variable in this row reached the given side of its bounds.
    Row { row: usize, to_upper: bool },
    /// Nothing limits the step.
    None,
}

struct Simplex {
    m: usize,
    n_struct: usize,
    n_cols: usize,
    /// Pristine equality system `a . x = b` (structural + slack + artificial
    /// columns, row-major); used for residual checks and basis refreshes.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Current tableau `B^-1 a`, row-major.
    tab: Vec<f64>,
    /// Current values of basic variables, aligned with rows.
    beta: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    /// Row a basic column currently occupies (undefined for nonbasic).
    row_of: Vec<usize>,
    /// Reduced costs for the active phase.
    d: Vec<f64>,
    /// First artificial column.
    art0: usize,
    /// Phase-2 cost per column (structural objective, zero elsewhere).
    cost: Vec<f64>,
    bland: bool,
    degen_streak: u32,
    pivots: u64,
    in_phase_one: bool,
}

impl Simplex {
    fn new(input: &LpInput) -> Self {
        let m = input.constraints.len();
        let n_struct = input.objective.len();
        let n_slack = input
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let art0 = n_struct + n_slack;
        let n_cols = art0 + m;

        let mut a = vec![0.0; m * n_cols];
        let mut b = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(n_cols);
        let mut upper = Vec::with_capacity(n_cols);
        lower.extend_from_slice(input.lower);
        upper.extend_from_slice(input.upper);
        for _ in n_struct..n_cols {
            lower.push(0.0);
            upper.push(f64::INFINITY);
        }

        let mut cost = vec![0.0; n_cols];
        cost[..n_struct].copy_from_slice(input.objective);

        let mut slack = n_struct;
        for (i, row) in input.constraints.iter().enumerate() {
            a[i * n_cols..i * n_cols + n_struct].copy_from_slice(&row.coeffs);
            match row.relation {
                Relation::Le => {
                    a[i * n_cols + slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    a[i * n_cols + slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            b.push(row.rhs);
        }

        // Nonbasic variables rest at a finite bound (preferring the lower).
        let mut state = Vec::with_capacity(n_cols);
        for j in 0..n_cols {
            state.push(if lower[j].is_finite() {
                VarState::AtLower
            } else if upper[j].is_finite() {
                VarState::AtUpper
            } else {
                VarState::Free
            });
        }

        // Artificial columns close the residual of the starting point and
        // form the initial identity basis.
        let mut beta = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut tab = vec![0.0; m * n_cols];
        let mut row_of = vec![usize::MAX; n_cols];
        for i in 0..m {
            let mut residual = b[i];
            for j in 0..art0 {
                let coeff = a[i * n_cols + j];
                if coeff != 0.0 {
                    residual -= coeff
                        * match state[j] {
                            VarState::AtLower => lower[j],
                            VarState::AtUpper => upper[j],
                            _ => 0.0,
                        };
                }
            }
            let sign = if residual >= 0.0 { 1.0 } else { -1.0 };
            a[i * n_cols + art0 + i] = sign;
            for j in 0..n_cols {
                tab[i * n_cols + j] = sign * a[i * n_cols + j];
            }
            beta.push(residual.abs());
            basis.push(art0 + i);
            state[art0 + i] = VarState::Basic;
            row_of[art0 + i] = i;
        }

        Simplex {
            m,
            n_struct,
            n_cols,
            a,
            b,
            tab,
            beta,
            lower,
            upper,
            state,
            basis,
            row_of,
            d: vec![0.0; n_cols],
            art0,
            cost,
            bland: false,
            degen_streak: 0,
            pivots: 0,
            in_phase_one: true,
        }
    }

    fn value_of(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::Basic => self.beta[self.row_of[j]],
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Free => 0.0,
        }
    }

    fn phase_cost(&self, j: usize) -> f64 {
        if self.in_phase_one {
            if j >= self.art0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.cost[j]
        }
    }

    /// Recomputes reduced costs `d = c - c_B^T (B^-1 a)` from scratch.
    fn recompute_reduced_costs(&mut self) {
        for j in 0..self.n_cols {
            self.d[j] = self.phase_cost(j);
        }
        for i in 0..self.m {
            let cb = self.phase_cost(self.basis[i]);
            if cb != 0.0 {
                let row = &self.tab[i * self.n_cols..(i + 1) * self.n_cols];
                for j in 0..self.n_cols {
                    self.d[j] -= cb * row[j];
                }
            }
        }
    }

    /// Runs pivots until the active phase's objective is optimal.
    /// Returns `false` when the problem is unbounded in this phase.
    fn iterate(&mut self) -> bool {
        loop {
            self.pivots += 1;
            if self.pivots % 512 == 0 {
                // Periodic hygiene against drift in the incrementally
                // maintained reduced costs.
                self.recompute_reduced_costs();
            }

            // --- entering column ---
            let mut entering: Option<(f64, usize, f64)> = None; // (score, col, direction)
            for j in 0..self.n_cols {
                if self.state[j] == VarState::Basic {
                    continue;
                }
                let span = self.upper[j] - self.lower[j];
                if !(span > 0.0) {
                    continue; // fixed variable can never move
                }
                let dj = self.d[j];
                let candidate = match self.state[j] {
                    VarState::AtLower if dj < -COST_EPS => Some((-dj, 1.0)),
                    VarState::AtUpper if dj > COST_EPS => Some((dj, -1.0)),
                    VarState::Free if dj.abs() > COST_EPS => {
                        Some((dj.abs(), if dj > 0.0 { -1.0 } else { 1.0 }))
                    }
                    _ => None,
                };
                if let Some((score, dir)) = candidate {
                    if self.bland {
                        entering = Some((score, j, dir));
                        break; // Bland: first (smallest-index) improving column
                    }
                    match entering {
                        Some((best, _, _)) if best >= score => {}
                        _ => entering = Some((score, j, dir)),
                    }
                }
            }
            let Some((_, col, dir)) = entering else {
                return true; // optimal for this phase
            };

            // --- ratio test ---
            let span = self.upper[col] - self.lower[col];
            let mut t_best = if span.is_finite() { span } else { f64::INFINITY };
            let mut limit = if span.is_finite() { StepLimit::Entering } else { StepLimit::None };
            let mut limit_pivot_abs = 0.0;
            for i in 0..self.m {
                let alpha = self.tab[i * self.n_cols + col];
                let rate = dir * alpha;
                let basic = self.basis[i];
                let (bound_gap, to_upper) = if rate > PIVOT_EPS {
                    if !self.lower[basic].is_finite() {
                        continue;
                    }
                    (self.beta[i] - self.lower[basic], false)
                } else if rate < -PIVOT_EPS {
                    if !self.upper[basic].is_finite() {
                        continue;
                    }
                    (self.upper[basic] - self.beta[i], true)
                } else {
                    continue;
                };
                let t = (bound_gap / rate.abs()).max(0.0);
                let tie_eps = 1e-9 * (1.0 + t_best.abs().min(1e12));
                let take = if t < t_best - tie_eps {
                    true
                } else if (t - t_best).abs() <= tie_eps {
                    match limit {
                        StepLimit::Row { row, .. } => {
                            if self.bland {
                                basic < self.basis[row]
                            } else {
                                let a_abs = alpha.abs();
                                a_abs > limit_pivot_abs * (1.0 + 1e-12)
                                    || (a_abs >= limit_pivot_abs * (1.0 - 1e-12)
                                        && basic < self.basis[row])
                            }
                        }
                        // Prefer the cheap bound flip on ties with the span.
                        StepLimit::Entering => false,
                        StepLimit::None => true,
                    }
                } else {
                    false
                };
                if take {
                    t_best = t.min(t_best);
                    limit = StepLimit::Row { row: i, to_upper };
                    limit_pivot_abs = alpha.abs();
                }
            }

            if let StepLimit::None = limit {
                return false; // unbounded ray in this phase
            }

            if t_best <= DEGEN_STEP {
                self.degen_streak += 1;
                if self.degen_streak >= BLAND_TRIGGER {
                    self.bland = true;
                }
            } else {
                self.degen_streak = 0;
                self.bland = false;
            }

            match limit {
                StepLimit::Entering => {
                    // Bound flip: no basis change.
                    for i in 0..self.m {
                        let alpha = self.tab[i * self.n_cols + col];
                        if alpha != 0.0 {
                            self.beta[i] -= dir * t_best * alpha;
                        }
                    }
                    self.state[col] = match self.state[col] {
                        VarState::AtLower => VarState::AtUpper,
                        VarState::AtUpper => VarState::AtLower,
                        other => other,
                    };
                }
                StepLimit::Row { row, to_upper } => {
                    let new_value = self.value_of(col) + dir * t_best;
                    for i in 0..self.m {
                        if i != row {
                            let alpha = self.tab[i * self.n_cols + col];
                            if alpha != 0.0 {
                                self.beta[i] -= dir * t_best * alpha;
                            }
                        }
                    }
                    self.beta[row] = new_value;

                    let leaving = self.basis[row];
                    self.state[leaving] = if to_upper { VarState::AtUpper } else { VarState::AtLower };
                    self.row_of[leaving] = usize::MAX;
                    if self.in_phase_one && leaving >= self.art0 {
                        // An artificial that left the basis must never return.
                        self.upper[leaving] = 0.0;
                        self.state[leaving] = VarState::AtLower;
                    }
                    self.basis[row] = col;
                    self.state[col] = VarState::Basic;
                    self.row_of[col] = row;
                    self.pivot_rows(row, col);
                }
                StepLimit::None => unreachable!(),
            }
        }
    }

    /// Gauss-eliminates column `col` against pivot row `row` in the tableau
    /// and the reduced-cost row.
    fn pivot_rows(&mut self, row: usize, col: usize) {
        let n = self.n_cols;
        let piv = self.tab[row * n + col];
        let inv = 1.0 / piv;
        for j in 0..n {
            self.tab[row * n + j] *= inv;
        }
        self.tab[row * n + col] = 1.0;
        for i in 0..self.m {
            if i == row {
                continue;
            }
            let factor = self.tab[i * n + col];
            if factor.abs() > 1e-13 {
                for j in 0..n {
                    self.tab[i * n + j] -= factor * self.tab[row * n + j];
                }
                self.tab[i * n + col] = 0.0;
            }
        }
        let dj = self.d[col];
        if dj != 0.0 {
            for j in 0..n {
                self.d[j] -= dj * self.tab[row * n + j];
            }
            self.d[col] = 0.0;
        }
    }

    /// Moves artificial variables out of the basis after phase one, fixing
    /// them to zero. Rows that admit no pivot are redundant and keep their
    /// (zero-valued, zero-span) artificial.
    fn retire_artificials(&mut self) {
        for row in 0..self.m {
            if self.basis[row] < self.art0 {
                continue;
            }
            let mut replacement = None;
            for j in 0..self.art0 {
                if self.state[j] != VarState::Basic
                    && self.tab[row * self.n_cols + j].abs() > PIVOT_EPS
                {
                    replacement = Some(j);
                    break;
                }
            }
            if let Some(col) = replacement {
                let art = self.basis[row];
                let incoming_value = self.value_of(col);
                self.state[art] = VarState::AtLower;
                self.row_of[art] = usize::MAX;
                self.basis[row] = col;
                self.state[col] = VarState::Basic;
                self.row_of[col] = row;
                self.beta[row] = incoming_value;
                self.pivot_rows(row, col);
            }
        }
        for j in self.art0..self.n_cols {
            self.upper[j] = 0.0;
            if self.state[j] != VarState::Basic {
                self.state[j] = VarState::AtLower;
            }
        }
    }

    fn run(mut self) -> LpOutcome {
        // Phase one: minimize the artificial-variable total.
        self.recompute_reduced_costs();
        let bounded = self.iterate();
        debug_assert!(bounded, "phase-one objective is bounded below by zero");
        if !bounded {
            return LpOutcome::Infeasible;
        }
        let infeasibility: f64 = (self.art0..self.n_cols).map(|j| self.value_of(j)).sum();
        let b_scale = self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if infeasibility > 1e-8 * (1.0 + b_scale) {
            return LpOutcome::Infeasible;
        }
        self.retire_artificials();

        // Phase two: the real objective.
        self.in_phase_one = false;
        self.bland = false;
        self.degen_streak = 0;
        self.recompute_reduced_costs();
        if !self.iterate() {
            return LpOutcome::Unbounded;
        }
        self.extract()
    }

    /// Residual `b - a . x` of the original rows at the given full-column
    /// value assignment; returns the largest magnitude.
    fn max_residual(&self, values: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m {
            let mut acc = self.b[i];
            let row = &self.a[i * self.n_cols..(i + 1) * self.n_cols];
            for j in 0..self.n_cols {
                if row[j] != 0.0 {
                    acc -= row[j] * values[j];
                }
            }
            worst = worst.max(acc.abs());
        }
        worst
    }

    fn full_values(&self) -> Vec<f64> {
        (0..self.n_cols).map(|j| self.value_of(j)).collect()
    }

    fn extract(&mut self) -> LpOutcome {
        let mut values = self.full_values();
        if self.m > 0 && self.max_residual(&values) > REFRESH_RESIDUAL {
            // Re-solve the basic values against the pristine system to shed
            // the drift the incrementally eliminated tableau accumulates.
            let n = self.n_cols;
            let mut mat = vec![0.0; self.m * self.m];
            for i in 0..self.m {
                for (k, &bj) in self.basis.iter().enumerate() {
                    mat[i * self.m + k] = self.a[i * n + bj];
                }
            }
            let mut rhs = self.b.clone();
            for j in 0..n {
                if self.state[j] != VarState::Basic {
                    let v = values[j];
                    if v != 0.0 {
                        for i in 0..self.m {
                            let coeff = self.a[i * n + j];
                            if coeff != 0.0 {
                                rhs[i] -= coeff * v;
                            }
                        }
                    }
                }
            }
            if let Some(fresh) = solve_dense_system(mat, rhs, self.m) {
                let mut refreshed = values.clone();
                for (k, &bj) in self.basis.iter().enumerate() {
                    refreshed[bj] = fresh[k];
                }
                if self.max_residual(&refreshed) < self.max_residual(&values) {
                    self.beta.copy_from_slice(&fresh);
                    values = refreshed;
                }
            }
        }

        let structural: Vec<f64> = values[..self.n_struct].to_vec();
        let objective = self
            .cost
            .iter()
            .take(self.n_struct)
            .zip(&structural)
            .map(|(c, v)| c * v)
            .sum();
        LpOutcome::Optimal { values: structural, objective }
    }
}

/// Solves `mat . x = rhs` (row-major `m x m`) by LU with partial pivoting.
/// Returns `None` for singular systems.
fn solve_dense_system(mut mat: Vec<f64>, mut rhs: Vec<f64>, m: usize) -> Option<Vec<f64>> {
    let mut perm: Vec<usize> = (0..m).collect();
    for k in 0..m {
        let mut best = k;
        let mut best_abs = mat[perm[k] * m + k].abs();
        for r in k + 1..m {
            let a = mat[perm[r] * m + k].abs();
            if a > best_abs {
                best_abs = a;
                best = r;
            }
        }
        if best_abs < 1e-12 {
            return None;
        }
        perm.swap(k, best);
        let prow = perm[k];
        let piv = mat[prow * m + k];
        for r in k + 1..m {
            let row = perm[r];
            let factor = mat[row * m + k] / piv;
            if factor != 0.0 {
                mat[row * m + k] = 0.0;
                for c in k + 1..m {
                    mat[row * m + c] -= factor * mat[prow * m + c];
                }
                rhs[row] -= factor * rhs[prow];
            }
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let row = perm[k];
        let mut acc = rhs[row];
        for c in k + 1..m {
            acc -= mat[row * m + c] * x[c];
        }
        x[k] = acc / mat[row * m + k];
    }
    Some(x)
}

pub(crate) fn feasibility_violation(
    constraints: &[Constraint],
    lower: &[f64],
    upper: &[f64],
    values: &[f64],
) -> f64 {
    let mut worst = 0.0f64;
    for row in constraints {
        let lhs: f64 = row.coeffs.iter().zip(values).map(|(c, v)| c * v).sum();
        let gap = match row.relation {
            Relation::Le => lhs - row.rhs,
            Relation::Ge => row.rhs - lhs,
            Relation::Eq => (lhs - row.rhs).abs(),
        };
        worst = worst.max(gap);
    }
    for (j, v) in values.iter().enumerate() {
        worst = worst.max(lower[j] - v).max(v - upper[j]);
    }
    worst
}
