//! Brute-force LP oracle: enumerate every basic point (n active constraints
//! out of rows and finite bounds), keep the feasible ones, take the best.
//! Shares no code with the simplex solver.

use powergame::lp::LpProblem;
use rand::Rng;

/// Best objective over feasible vertices, or `None` when no vertex is
/// feasible. Requires finite bounds on every variable.
pub fn vertex_enumeration(lp: &LpProblem) -> Option<f64> {
    let n = lp.n;
    // Each candidate constraint as (coeffs, rhs) with equality semantics when active.
    let mut cands: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &lp.ineq_rows {
        cands.push((r.coeffs.clone(), r.rhs));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        assert!(lo.is_finite() && hi.is_finite(), "oracle needs a box");
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cands.push((e.clone(), lo));
        cands.push((e, hi));
    }
    let eqs: Vec<(Vec<f64>, f64)> = lp.eq_rows.iter().map(|r| (r.coeffs.clone(), r.rhs)).collect();
    if eqs.len() > n {
        return None;
    }
    let pick = n - eqs.len();
    let mut best: Option<f64> = None;
    let mut chosen = Vec::with_capacity(pick);
    combos(cands.len(), pick, 0, &mut chosen, &mut |idx| {
        let mut a: Vec<Vec<f64>> = eqs.iter().map(|e| e.0.clone()).collect();
        let mut b: Vec<f64> = eqs.iter().map(|e| e.1).collect();
        for &k in idx {
            a.push(cands[k].0.clone());
            b.push(cands[k].1);
        }
        if let Some(x) = gauss_solve(a, b) {
            if feasible(lp, &x) {
                let v: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
    });
    best
}

fn combos(total: usize, k: usize, start: usize, chosen: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if chosen.len() == k {
        f(chosen);
        return;
    }
    for i in start..total {
        if total - i < k - chosen.len() {
            break;
        }
        chosen.push(i);
        combos(total, k, i + 1, chosen, f);
        chosen.pop();
    }
}

fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[p][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, p);
        b.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn feasible(lp: &LpProblem, x: &[f64]) -> bool {
    let tol = 1e-9;
    let dot = |c: &[f64]| c.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    lp.ineq_rows.iter().all(|r| dot(&r.coeffs) >= r.rhs - tol)
        && lp.eq_rows.iter().all(|r| (dot(&r.coeffs) - r.rhs).abs() <= tol)
        && x.iter().zip(&lp.bounds).all(|(&v, &(lo, hi))| v >= lo - tol && v <= hi + tol)
}

/// Random bounded LP with at most `max_vars` variables and `max_rows` rows.
/// Rows are built around a random interior point, so the LP is feasible unless
/// `infeasible` is set, in which case a contradictory pair of rows is added.
pub fn random_bounded_lp<R: Rng>(rng: &mut R, max_vars: usize, max_rows: usize, infeasible: bool) -> LpProblem {
    let n = rng.random_range(1..=max_vars);
    let rows = rng.random_range(1..=max_rows);
    let objective = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut lp = LpProblem::new(objective);
    let mut x0 = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.random_range(-2.0..1.0);
        let hi = lo + rng.random_range(0.5..4.0);
        lp.set_bounds(j, lo, hi);
        x0.push(rng.random_range(lo..hi));
    }
    let budget_rows = if infeasible { rows.saturating_sub(2) } else { rows };
    for k in 0..budget_rows {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let at: f64 = coeffs.iter().zip(&x0).map(|(a, b)| a * b).sum();
        match (k, rng.random_range(0..6)) {
            // At most one equality, through the interior point.
            (0, 0) => {
                lp.add_eq(coeffs, at);
            }
            // Tight rows create degenerate vertices.
            (_, 1) => {
                lp.add_ge(coeffs, at);
            }
            (_, 2) => {
                lp.add_le(coeffs, at + rng.random_range(0.0..1.0));
            }
            _ => {
                lp.add_ge(coeffs, at - rng.random_range(0.0..1.0));
            }
        }
    }
    if infeasible {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        lp.add_ge(coeffs.clone(), 1.0);
        lp.add_le(coeffs, 0.5);
    }
    lp
}
