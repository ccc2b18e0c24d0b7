//! Cross-checks the simplex against a brute-force vertex enumerator on small
//! randomized LPs. The oracle is deliberately naive: it enumerates every
//! candidate active set, solves the corresponding square linear system by
//! Gaussian elimination, keeps the feasible points, and minimizes directly —
//! no pivoting logic shared with the solver under test.

use milp_core::{max_violation, solve_lp, MilpModel, Relation, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `mat . x = rhs` (n x n) by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn gauss_solve(mut mat: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for k in 0..n {
        let mut best = k;
        for r in k + 1..n {
            if mat[r][k].abs() > mat[best][k].abs() {
                best = r;
            }
        }
        if mat[best][k].abs() < 1e-10 {
            return None;
        }
        mat.swap(k, best);
        rhs.swap(k, best);
        for r in k + 1..n {
            let f = mat[r][k] / mat[k][k];
            if f != 0.0 {
                for c in k..n {
                    mat[r][c] -= f * mat[k][c];
                }
                rhs[r] -= f * rhs[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for c in k + 1..n {
            acc -= mat[k][c] * x[c];
        }
        x[k] = acc / mat[k][k];
    }
    Some(x)
}

/// One linear condition `coeffs . x = rhs` that may be forced active.
struct Facet {
    coeffs: Vec<f64>,
    rhs: f64,
    /// Equality rows must be active at every feasible point.
    mandatory: bool,
}

/// Enumerates every vertex of the (bounded) feasible region and returns the
/// minimal objective value, or `None` when no feasible vertex exists.
fn vertex_enumerate_min(model: &MilpModel) -> Option<f64> {
    let n = model.num_vars();
    let mut facets: Vec<Facet> = Vec::new();
    for row in model.constraints() {
        facets.push(Facet {
            coeffs: row.coeffs.clone(),
            rhs: row.rhs,
            mandatory: row.relation == Relation::Eq,
        });
    }
    for j in 0..n {
        let mut lo = vec![0.0; n];
        lo[j] = 1.0;
        facets.push(Facet { coeffs: lo.clone(), rhs: model.lower_bounds()[j], mandatory: false });
        facets.push(Facet { coeffs: lo, rhs: model.upper_bounds()[j], mandatory: false });
    }

    let mandatory: Vec<usize> =
        (0..facets.len()).filter(|&i| facets[i].mandatory).collect();
    let optional: Vec<usize> =
        (0..facets.len()).filter(|&i| !facets[i].mandatory).collect();
    if mandatory.len() > n {
        // More equalities than dimensions never happens in these instances.
        panic!("oracle instance with more equality rows than variables");
    }
    let need = n - mandatory.len();

    let mut best: Option<f64> = None;
    let mut chosen = vec![0usize; need];
    enumerate_combinations(&optional, need, &mut chosen, 0, 0, &mut |subset| {
        let mut mat = Vec::with_capacity(n);
        let mut rhs = Vec::with_capacity(n);
        for &i in mandatory.iter().chain(subset.iter()) {
            mat.push(facets[i].coeffs.clone());
            rhs.push(facets[i].rhs);
        }
        let Some(point) = gauss_solve(mat, rhs) else {
            return;
        };
        if max_violation(model, &point) > 1e-7 {
            return;
        }
        let obj: f64 = model.objective().iter().zip(&point).map(|(c, v)| c * v).sum();
        best = Some(match best {
            Some(b) => b.min(obj),
            None => obj,
        });
    });
    best
}

fn enumerate_combinations(
    pool: &[usize],
    need: usize,
    chosen: &mut Vec<usize>,
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == need {
        visit(chosen);
        return;
    }
    for i in start..pool.len() {
        chosen[depth] = pool[i];
        enumerate_combinations(pool, need, chosen, depth + 1, i + 1, visit);
    }
}

/// Builds a random LP over a bounded box that is feasible by construction:
/// constraints are anchored around a random interior point.
fn random_feasible_lp(rng: &mut ChaCha8Rng) -> MilpModel {
    let n = rng.gen_range(2..=5);
    let rows = rng.gen_range(1..=8);
    let mut model = MilpModel::new(n);
    let mut anchor = vec![0.0; n];
    for j in 0..n {
        let lo = rng.gen_range(-2.0..0.0);
        let hi = lo + rng.gen_range(0.5..4.0);
        model.set_bounds(j, lo, hi);
        anchor[j] = rng.gen_range(lo..hi);
        model.set_objective(j, rng.gen_range(-2.0..2.0));
    }
    let mut n_eq = 0;
    for _ in 0..rows {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let at_anchor: f64 = coeffs.iter().zip(&anchor).map(|(c, v)| c * v).sum();
        let relation = match rng.gen_range(0..6) {
            0 if n_eq < 2 => {
                n_eq += 1;
                Relation::Eq
            }
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        let rhs = match relation {
            Relation::Le => at_anchor + rng.gen_range(0.0..1.5),
            Relation::Ge => at_anchor - rng.gen_range(0.0..1.5),
            Relation::Eq => at_anchor,
        };
        model.add_constraint(coeffs, relation, rhs);
    }
    model
}

#[test]
fn simplex_matches_vertex_enumeration_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_1);
    let mut checked = 0;
    for case in 0..250 {
        let model = random_feasible_lp(&mut rng);
        let sol = solve_lp(&model).unwrap();
        assert_eq!(
            sol.status,
            SolveStatus::Optimal,
            "case {case}: instance is feasible and bounded by construction"
        );
        assert!(
            max_violation(&model, &sol.values) <= 1e-9,
            "case {case}: solution violates a row or bound by {:.3e}",
            max_violation(&model, &sol.values)
        );
        let oracle = vertex_enumerate_min(&model)
            .expect("oracle must find a vertex of a feasible bounded region");
        let scale = oracle.abs().max(1.0);
        assert!(
            (sol.objective_value - oracle).abs() <= 1e-6 * scale,
            "case {case}: simplex {} vs vertex oracle {}",
            sol.objective_value,
            oracle
        );
        checked += 1;
    }
    assert_eq!(checked, 250);
}

#[test]
fn simplex_handles_degenerate_overlapping_rows() {
    // Several copies of the same facet plus redundant rows: exercises
    // degenerate pivots and the anti-cycling fallback.
    let mut model = MilpModel::new(3);
    model.set_objective_vec(vec![-1.0, -1.0, -1.0]);
    for j in 0..3 {
        model.set_bounds(j, 0.0, 1.0);
    }
    for _ in 0..4 {
        model.add_constraint(vec![1.0, 1.0, 1.0], Relation::Le, 2.0);
    }
    model.add_constraint(vec![2.0, 2.0, 2.0], Relation::Le, 4.0);
    model.add_constraint(vec![1.0, 0.0, 0.0], Relation::Le, 1.0);
    let sol = solve_lp(&model).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective_value + 2.0).abs() <= 1e-9);
}

#[test]
fn redundant_equalities_do_not_confuse_phase_one() {
    // The second equality is a scalar multiple of the first; phase one must
    // park the redundant row's artificial at zero and move on.
    let mut model = MilpModel::new(2);
    model.set_objective_vec(vec![1.0, 3.0]);
    model.set_bounds(0, 0.0, 5.0);
    model.set_bounds(1, 0.0, 5.0);
    model.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0);
    model.add_constraint(vec![2.0, 2.0], Relation::Eq, 4.0);
    let sol = solve_lp(&model).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.values[0] - 2.0).abs() <= 1e-9);
    assert!((sol.values[1]).abs() <= 1e-9);
    assert!((sol.objective_value - 2.0).abs() <= 1e-9);
}
