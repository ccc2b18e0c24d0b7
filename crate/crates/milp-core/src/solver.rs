//! Public solve entry points: plain LP relaxation and the semi-continuous
//! branch-and-bound.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::model::{MilpModel, ModelError, Relation, SemiContinuity};
use crate::simplex::{feasibility_violation, solve_lp_dense, LpInput, LpOutcome, FEAS_EPS};

/// Semi-continuity tolerance: a value counts as "off" below this, and as
/// "on" when at least `threshold` minus this.
pub const SEMI_TOL: f64 = 1e-9;
/// Relative optimality gap at which branch-and-bound stops.
pub const GAP_TOL: f64 = 1e-6;

/// How a solve ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// `values` holds an optimal solution.
    Optimal,
    /// No feasible point exists; `values` is empty.
    Infeasible,
    /// The objective decreases without bound; `values` is empty.
    Unbounded,
    /// The node or time budget ran out. `values` holds the best incumbent
    /// found so far (empty if none), which is feasible but possibly
    /// suboptimal. Callers must not treat this as a silent success.
    NodeLimit,
}

/// Result of a solve.
///
/// Conventions: `objective_value` is `+inf` for `Infeasible`, `-inf` for
/// `Unbounded`, and `+inf` for a `NodeLimit` with no incumbent.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective_value: f64,
}

/// Search budgets for [`solve_semi_continuous`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveLimits {
    /// Maximum number of node LP solves.
    pub max_nodes: usize,
    /// Optional wall-clock budget. Leaving this unset keeps solves fully
    /// deterministic; setting it trades determinism for a hard stop.
    pub time_budget: Option<Duration>,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { max_nodes: 100_000, time_budget: None }
    }
}

/// One violated condition found by [`check_solution`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Row index for `Row`, variable index otherwise.
    pub index: usize,
    /// How far outside the admissible region the value lies.
    pub amount: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Row,
    LowerBound,
    UpperBound,
    SemiContinuity,
}

/// Re-checks a value assignment against every row, bound and semi-continuity
/// mark of `model`, independent of any solver state. Returns all conditions
/// violated by more than `tol`.
pub fn check_solution(model: &MilpModel, values: &[f64], tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, row) in model.constraints().iter().enumerate() {
        let lhs: f64 = row.coeffs.iter().zip(values).map(|(c, v)| c * v).sum();
        let gap = match row.relation {
            Relation::Le => lhs - row.rhs,
            Relation::Ge => row.rhs - lhs,
            Relation::Eq => (lhs - row.rhs).abs(),
        };
        if gap > tol {
            out.push(Violation { kind: ViolationKind::Row, index: i, amount: gap });
        }
    }
    for j in 0..model.num_vars() {
        let v = values[j];
        let lo = model.lower_bounds()[j];
        let hi = model.upper_bounds()[j];
        if lo - v > tol {
            out.push(Violation { kind: ViolationKind::LowerBound, index: j, amount: lo - v });
        }
        if v - hi > tol {
            out.push(Violation { kind: ViolationKind::UpperBound, index: j, amount: v - hi });
        }
    }
    for s in model.semi_continuities() {
        let v = values[s.var];
        if v > tol && v < s.threshold - tol {
            out.push(Violation {
                kind: ViolationKind::SemiContinuity,
                index: s.var,
                amount: (v - s.threshold).abs().min(v),
            });
        }
    }
    out
}

/// Solves the LP relaxation of `model`: semi-continuity marks are ignored and
/// the marked variables range over their plain `[0, 1]` bounds.
pub fn solve_lp(model: &MilpModel) -> Result<MilpSolution, ModelError> {
    model.validate()?;
    Ok(lp_with_bounds(model, model.lower_bounds(), model.upper_bounds()))
}

fn lp_with_bounds(model: &MilpModel, lower: &[f64], upper: &[f64]) -> MilpSolution {
    let outcome = solve_lp_dense(&LpInput {
        objective: model.objective(),
        constraints: model.constraints(),
        lower,
        upper,
    });
    match outcome {
        LpOutcome::Optimal { values, objective } => MilpSolution {
            status: SolveStatus::Optimal,
            values,
            objective_value: objective,
        },
        LpOutcome::Infeasible => MilpSolution {
            status: SolveStatus::Infeasible,
            values: Vec::new(),
            objective_value: f64::INFINITY,
        },
        LpOutcome::Unbounded => MilpSolution {
            status: SolveStatus::Unbounded,
            values: Vec::new(),
            objective_value: f64::NEG_INFINITY,
        },
    }
}

/// A branch decision for one semi-continuous variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Decision {
    Undecided,
    Off,
    On,
}

/// Rewrites the bounds of every semi-continuous variable according to its
/// branch decision: `[0, 1]` while undecided, `[0, 0]` once forced off,
/// `[threshold, 1]` once forced on. Other variables keep their model bounds.
fn stamp_bounds(
    semis: &[SemiContinuity],
    decisions: &[Decision],
    lower: &mut [f64],
    upper: &mut [f64],
) {
    for (k, s) in semis.iter().enumerate() {
        match decisions[k] {
            Decision::Undecided => {
                lower[s.var] = 0.0;
                upper[s.var] = 1.0;
            }
            Decision::Off => {
                lower[s.var] = 0.0;
                upper[s.var] = 0.0;
            }
            Decision::On => {
                lower[s.var] = s.threshold;
                upper[s.var] = 1.0;
            }
        }
    }
}

/// Upper bound on LP solves a single rounding dive may spend.
const DIVE_MAX_LPS: usize = 48;

/// Greedy rounding dive: starting from an LP point that violates some
/// semi-continuities, repeatedly pick the offender closest to one of its
/// admissible sides, fix it there (falling back to the far side if that
/// turns infeasible), and re-solve, until the point is semi-feasible or the
/// attempt dies (both sides infeasible, iteration cap, or budget). The
/// result is feasible but usually suboptimal; it exists so tight node
/// budgets still return a schedule instead of failing with no incumbent at
/// all.
#[allow(clippy::too_many_arguments)]
fn rounding_dive(
    model: &MilpModel,
    semis: &[SemiContinuity],
    start_decisions: &[Decision],
    start: &MilpSolution,
    limits: &SolveLimits,
    started: &Instant,
    nodes_solved: &mut usize,
    lower: &mut [f64],
    upper: &mut [f64],
) -> Option<MilpSolution> {
    let mut decisions = start_decisions.to_vec();
    let mut current = start.clone();
    let mut lps: usize = 0;
    loop {
        // Offender closest to an admissible side; smallest index wins ties.
        let mut pick: Option<(f64, usize)> = None;
        for (k, s) in semis.iter().enumerate() {
            if decisions[k] != Decision::Undecided {
                continue;
            }
            let v = current.values[s.var];
            if v > SEMI_TOL && v < s.threshold - SEMI_TOL {
                let depth = v.min(s.threshold - v);
                match pick {
                    Some((best_depth, _)) if best_depth <= depth => {}
                    _ => pick = Some((depth, k)),
                }
            }
        }
        let Some((_, k)) = pick else {
            return Some(current);
        };
        let near = if current.values[semis[k].var] < semis[k].threshold / 2.0 {
            Decision::Off
        } else {
            Decision::On
        };
        let far = if near == Decision::Off { Decision::On } else { Decision::Off };
        let mut advanced = false;
        for side in [near, far] {
            if lps >= DIVE_MAX_LPS || *nodes_solved >= limits.max_nodes {
                return None;
            }
            if let Some(budget) = limits.time_budget {
                if started.elapsed() >= budget {
                    return None;
                }
            }
            decisions[k] = side;
            stamp_bounds(semis, &decisions, lower, upper);
            let relaxed = lp_with_bounds(model, lower, upper);
            *nodes_solved += 1;
            lps += 1;
            if relaxed.status == SolveStatus::Optimal {
                current = relaxed;
                advanced = true;
                break;
            }
        }
        if !advanced {
            return None;
        }
    }
}

struct Node {
    /// LP objective of the parent (a lower bound on this subtree).
    bound: f64,
    /// Creation order; ties in `bound` break on the older node.
    seq: u64,
    decisions: Vec<Decision>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest bound pops first.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solves `model` exactly, honoring semi-continuity marks by best-first
/// branch-and-bound: each fractional `v` in `(0, threshold)` splits into a
/// "forced off" child (`v = 0`) and a "forced on" child
/// (`threshold <= v <= 1`).
pub fn solve_semi_continuous(
    model: &MilpModel,
    limits: &SolveLimits,
) -> Result<MilpSolution, ModelError> {
    model.validate()?;
    let semis = {
        let mut s = model.semi_continuities().to_vec();
        s.sort_by_key(|m| m.var);
        s
    };
    if semis.is_empty() {
        return Ok(lp_with_bounds(model, model.lower_bounds(), model.upper_bounds()));
    }

    let started = Instant::now();
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq: u64 = 0;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        decisions: vec![Decision::Undecided; semis.len()],
    });

    let mut incumbent: Option<MilpSolution> = None;
    let mut nodes_solved: usize = 0;
    let mut budget_hit = false;
    let mut dived = false;

    let mut lower = model.lower_bounds().to_vec();
    let mut upper = model.upper_bounds().to_vec();

    while let Some(node) = heap.pop() {
        if let Some(best) = &incumbent {
            let cutoff = best.objective_value - GAP_TOL * best.objective_value.abs().max(1.0);
            if node.bound >= cutoff {
                break; // best-first: every open node is at least this bound
            }
        }
        if nodes_solved >= limits.max_nodes {
            budget_hit = true;
            break;
        }
        if let Some(budget) = limits.time_budget {
            if started.elapsed() >= budget {
                budget_hit = true;
                break;
            }
        }

        stamp_bounds(&semis, &node.decisions, &mut lower, &mut upper);
        let relaxed = lp_with_bounds(model, &lower, &upper);
        nodes_solved += 1;
        match relaxed.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                return Ok(MilpSolution {
                    status: SolveStatus::Unbounded,
                    values: Vec::new(),
                    objective_value: f64::NEG_INFINITY,
                });
            }
            _ => {}
        }
        if let Some(best) = &incumbent {
            let cutoff = best.objective_value - GAP_TOL * best.objective_value.abs().max(1.0);
            if relaxed.objective_value >= cutoff {
                continue;
            }
        }

        // Branch on the variable deepest inside the forbidden gap
        // (0, threshold); smallest index wins ties.
        let mut branch: Option<(f64, usize)> = None;
        for (k, s) in semis.iter().enumerate() {
            if node.decisions[k] != Decision::Undecided {
                continue;
            }
            let v = relaxed.values[s.var];
            if v > SEMI_TOL && v < s.threshold - SEMI_TOL {
                let depth = v.min(s.threshold - v);
                match branch {
                    Some((best_depth, _)) if best_depth >= depth => {}
                    _ => branch = Some((depth, k)),
                }
            }
        }

        match branch {
            None => {
                let better = match &incumbent {
                    Some(best) => relaxed.objective_value < best.objective_value - 1e-12,
                    None => true,
                };
                if better {
                    incumbent = Some(relaxed);
                }
            }
            Some((_, k)) => {
                // First time branching is needed and nothing feasible is in
                // hand, spend a few LPs on rounding dives so a later budget
                // stop can still return a schedule.
                if incumbent.is_none() && !dived {
                    dived = true;
                    incumbent = rounding_dive(
                        model,
                        &semis,
                        &node.decisions,
                        &relaxed,
                        limits,
                        &started,
                        &mut nodes_solved,
                        &mut lower,
                        &mut upper,
                    );
                }
                for decision in [Decision::Off, Decision::On] {
                    let mut decisions = node.decisions.clone();
                    decisions[k] = decision;
                    seq += 1;
                    heap.push(Node { bound: relaxed.objective_value, seq, decisions });
                }
            }
        }
    }

    Ok(match (incumbent, budget_hit) {
        (Some(mut best), hit) => {
            if hit {
                best.status = SolveStatus::NodeLimit;
            }
            best
        }
        (None, true) => MilpSolution {
            status: SolveStatus::NodeLimit,
            values: Vec::new(),
            objective_value: f64::INFINITY,
        },
        (None, false) => MilpSolution {
            status: SolveStatus::Infeasible,
            values: Vec::new(),
            objective_value: f64::INFINITY,
        },
    })
}

/// Largest constraint/bound violation of `values` for `model`, ignoring
/// semi-continuity. Exposed for tests and diagnostics.
pub fn max_violation(model: &MilpModel, values: &[f64]) -> f64 {
    feasibility_violation(
        model.constraints(),
        model.lower_bounds(),
        model.upper_bounds(),
        values,
    )
}

/// Default absolute feasibility tolerance honored by returned solutions.
pub const FEASIBILITY_TOL: f64 = FEAS_EPS;
