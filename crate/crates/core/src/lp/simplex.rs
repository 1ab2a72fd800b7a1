use super::{LpProblem, LpSolution, LpStatus};
use crate::error::{Error, Result};
use crate::par::{self, Exec};

/// Tolerances and limits for [`Simplex`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Primal feasibility tolerance (phase-one objective, final residuals).
    pub feasibility_tol: f64,
    /// Reduced-cost optimality tolerance.
    pub optimality_tol: f64,
    /// Pivot elements at or below this magnitude are never chosen.
    pub pivot_tol: f64,
    /// Iteration cap; `None` means `50 · (n + rows)`.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots tolerated under Dantzig pricing before
    /// switching to Bland's rule until the objective moves again.
    pub stall_threshold: usize,
    /// Relative right-hand-side perturbation applied to slack rows while
    /// pivoting (removed before the solution is reported); 0 disables it.
    pub perturbation: f64,
    /// Refuse tableaus larger than this many entries.
    pub max_tableau_entries: usize,
    pub exec: Exec,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-11,
            max_iterations: None,
            stall_threshold: 30,
            perturbation: 1e-7,
            max_tableau_entries: 100_000_000,
            exec: Exec::Parallel,
        }
    }
}

/// Solves `problem` with default options.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    Simplex::new(SolverOptions::default()).solve(problem)
}

/// How an original variable is expressed through nonnegative columns.
#[derive(Clone, Copy, Debug)]
enum VarMap {
    /// `x = lo + y`
    Shift { col: usize, lo: f64 },
    /// `x = hi - y`
    Flip { col: usize, hi: f64 },
    /// `x = y⁺ - y⁻`
    Free { pos: usize, neg: usize },
}

impl VarMap {
    fn value(&self, y: &[f64]) -> f64 {
        match *self {
            VarMap::Shift { col, lo } => lo + y[col],
            VarMap::Flip { col, hi } => hi - y[col],
            VarMap::Free { pos, neg } => y[pos] - y[neg],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pricing {
    Dantzig,
    Bland,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

enum Attempt {
    Done(LpStatus, Option<Vec<f64>>),
    /// Numerical trouble after phase one.
    Retry,
}

enum Cleanup {
    Feasible,
    Stuck,
}

/// Standard form `maximize c·y, A y = b, y ≥ 0, b ≥ 0` as a dense tableau.
///
/// Every row owns one column (a slack or an artificial) that starts basic
/// with coefficient `+1`; those columns of the live tableau hold `B⁻¹`, which
/// the final refinement step relies on.
struct Tableau {
    rows: usize,
    /// `cols + 1` (the last entry of each row is the right-hand side).
    width: usize,
    data: Vec<f64>,
    /// Reduced costs `z_j - c_j`; last entry is the current objective.
    obj: Vec<f64>,
    basis: Vec<usize>,
    /// Column that was basic for each row at the start.
    initial_basic: Vec<usize>,
    /// First artificial column; columns at or after it never re-enter.
    first_artificial: usize,
    cost: Vec<f64>,
    original: Vec<f64>,
    original_rhs: Vec<f64>,
    pivot_row: Vec<f64>,
}

impl Tableau {
    fn cols(&self) -> usize {
        self.width - 1
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.width;
        self.obj.iter_mut().for_each(|v| *v = 0.0);
        for (j, c) in cost.iter().enumerate() {
            self.obj[j] = -c;
        }
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.data[r * w..(r + 1) * w];
                for (o, v) in self.obj.iter_mut().zip(row) {
                    *o += cb * v;
                }
            }
        }
        for r in 0..self.rows {
            self.obj[self.basis[r]] = 0.0;
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize, exec: Exec) {
        let w = self.width;
        let piv = self.at(pr, pc);
        {
            let row = &mut self.data[pr * w..(pr + 1) * w];
            row.iter_mut().for_each(|v| *v /= piv);
            row[pc] = 1.0;
            self.pivot_row.clear();
            self.pivot_row.extend_from_slice(row);
        }
        let prow = &self.pivot_row;
        let eliminate = |r: usize, row: &mut [f64]| {
            if r == pr {
                return;
            }
            let f = row[pc];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow) {
                    *v -= f * p;
                }
                row[pc] = 0.0;
            }
        };
        // Small tableaus are not worth the fork/join.
        let exec = if self.data.len() < 200_000 { Exec::Sequential } else { exec };
        par::for_each_chunk_mut(exec, &mut self.data, w, eliminate);
        let f = self.obj[pc];
        if f != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(prow) {
                *v -= f * p;
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    fn choose_entering(&self, pricing: Pricing, tol: f64) -> Option<usize> {
        let candidates = self.obj[..self.first_artificial].iter().enumerate();
        match pricing {
            Pricing::Bland => candidates.filter(|(_, &d)| d < -tol).map(|(j, _)| j).next(),
            Pricing::Dantzig => {
                let mut best: Option<(usize, f64)> = None;
                for (j, &d) in candidates {
                    if d < -tol && best.is_none_or(|(_, b)| d < b) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            }
        }
    }

    /// Leaving row for entering column `pc`. Under Dantzig pricing this is a
    /// two-pass (Harris) test: the bound on the step is relaxed by
    /// `harris_tol` and the largest pivot within that bound wins. Under Bland
    /// the exact minimum ratio is used, ties going to the smallest basic index.
    fn choose_leaving(&self, pc: usize, pricing: Pricing, pivot_tol: f64, harris_tol: f64) -> Option<usize> {
        match pricing {
            Pricing::Dantzig => {
                let mut bound = f64::INFINITY;
                for r in 0..self.rows {
                    let a = self.at(r, pc);
                    if a > pivot_tol {
                        bound = bound.min((self.rhs(r).max(0.0) + harris_tol) / a);
                    }
                }
                let mut best: Option<(usize, f64)> = None;
                for r in 0..self.rows {
                    let a = self.at(r, pc);
                    if a > pivot_tol && self.rhs(r).max(0.0) / a <= bound && best.is_none_or(|(_, b)| a > b) {
                        best = Some((r, a));
                    }
                }
                best.map(|(r, _)| r)
            }
            Pricing::Bland => {
                let mut best: Option<(usize, f64)> = None;
                for r in 0..self.rows {
                    let a = self.at(r, pc);
                    if a <= pivot_tol {
                        continue;
                    }
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match best {
                        None => true,
                        Some((br, bratio)) => {
                            if (ratio - bratio).abs() <= 1e-12 * (1.0 + bratio.abs()) {
                                self.basis[r] < self.basis[br]
                            } else {
                                ratio < bratio
                            }
                        }
                    };
                    if better {
                        best = Some((r, ratio));
                    }
                }
                best.map(|(r, _)| r)
            }
        }
    }

    /// Replaces the right-hand side by `B⁻¹ b` for the unperturbed `b`.
    fn restore_rhs(&mut self) {
        let w = self.width;
        for k in 0..self.rows {
            let mut v = 0.0;
            for (i, b) in self.original_rhs.iter().enumerate() {
                if *b != 0.0 {
                    v += self.at(k, self.initial_basic[i]) * b;
                }
            }
            self.data[k * w + w - 1] = v;
        }
        let mut z = 0.0;
        for k in 0..self.rows {
            z += self.cost[self.basis[k]] * self.rhs(k);
        }
        self.obj[w - 1] = z;
    }

    /// `B⁻¹ (b - B y_B)` correction applied to the basic values.
    fn refine(&mut self, sweeps: usize) {
        let w = self.width;
        let cols = self.cols();
        for _ in 0..sweeps {
            let mut resid = self.original_rhs.clone();
            for (i, res) in resid.iter_mut().enumerate() {
                let arow = &self.original[i * cols..(i + 1) * cols];
                for k in 0..self.rows {
                    *res -= arow[self.basis[k]] * self.rhs(k);
                }
            }
            if resid.iter().all(|v| v.abs() < 1e-15) {
                break;
            }
            for k in 0..self.rows {
                let mut d = 0.0;
                for (i, res) in resid.iter().enumerate() {
                    d += self.at(k, self.initial_basic[i]) * res;
                }
                self.data[k * w + w - 1] += d;
            }
        }
    }

    /// Largest value held by a basic artificial column.
    fn artificial_residual(&self) -> f64 {
        (0..self.rows)
            .filter(|&r| self.basis[r] >= self.first_artificial)
            .map(|r| self.rhs(r).abs())
            .fold(0.0, f64::max)
    }

    fn basic_values(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.cols()];
        for r in 0..self.rows {
            y[self.basis[r]] = self.rhs(r);
        }
        y
    }
}

/// Two-phase dense primal simplex. Holds scratch state; one solve at a time.
#[derive(Clone, Debug)]
pub struct Simplex {
    pub options: SolverOptions,
}

impl Simplex {
    pub fn new(options: SolverOptions) -> Self {
        Simplex { options }
    }

    pub fn solve(&mut self, problem: &LpProblem) -> Result<LpSolution> {
        problem.validate()?;
        let cap = self.options.max_iterations.unwrap_or(50 * (problem.n + problem.row_count()).max(1));
        // Phase one runs on a relaxation, so its infeasibility verdict is
        // final. Trouble after it is retried with a smaller perturbation and
        // finally none.
        let p = self.options.perturbation;
        let schedule: Vec<f64> = if p > 0.0 { vec![p, p * 1e-2, 0.0] } else { vec![0.0] };
        let mut iterations = 0usize;
        for (k, &perturbation) in schedule.iter().enumerate() {
            let last = k + 1 == schedule.len();
            match self.attempt(problem, perturbation, cap, &mut iterations) {
                Ok(Attempt::Done(status, x)) => {
                    let objective_value = x.as_ref().map(|x| problem.objective_at(x));
                    return Ok(LpSolution { status, x, objective_value, iterations });
                }
                Ok(Attempt::Retry) if last => return Err(Error::Stalled { iterations }),
                Ok(Attempt::Retry) => {}
                Err(Error::Stalled { .. }) if !last => {}
                Err(e) => return Err(e),
            }
        }
        unreachable!("the last attempt always returns")
    }

    fn attempt(&self, problem: &LpProblem, perturbation: f64, cap: usize, iterations: &mut usize) -> Result<Attempt> {
        let (mut tab, maps) = self.standard_form(problem, perturbation)?;
        let cols = tab.cols();
        let scale = 1.0 + tab.original_rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let start = *iterations;
        let budget = start + cap;
        if tab.first_artificial < cols {
            let mut phase1 = vec![0.0; cols];
            phase1[tab.first_artificial..].iter_mut().for_each(|c| *c = -1.0);
            tab.set_objective(&phase1);
            // Phase one is bounded above by zero. The perturbed problem is a
            // relaxation, so infeasibility here is final.
            self.run_phase(&mut tab, budget, iterations, true)?;
            if -tab.obj[cols] > self.options.feasibility_tol * scale {
                return Ok(Attempt::Done(LpStatus::Infeasible, None));
            }
            self.drive_out_artificials(&mut tab);
        }

        let cost = tab.cost.clone();
        tab.set_objective(&cost);
        if let PhaseEnd::Unbounded = self.run_phase(&mut tab, budget, iterations, false)? {
            return Ok(Attempt::Done(LpStatus::Unbounded, None));
        }

        // Put the exact right-hand side back (undoing perturbation and
        // shifts), repair primal feasibility with dual pivots and re-check
        // optimality.
        let mut settled = false;
        for _ in 0..4 {
            tab.restore_rhs();
            tab.refine(2);
            match self.dual_cleanup(&mut tab, budget, iterations)? {
                Cleanup::Feasible => {}
                Cleanup::Stuck => return Ok(Attempt::Retry),
            }
            if tab.artificial_residual() > self.options.feasibility_tol * scale {
                return Ok(Attempt::Retry);
            }
            let before = *iterations;
            if let PhaseEnd::Unbounded = self.run_phase(&mut tab, budget, iterations, false)? {
                return Ok(Attempt::Done(LpStatus::Unbounded, None));
            }
            if *iterations == before {
                settled = true;
                break;
            }
        }
        if !settled {
            return Ok(Attempt::Retry);
        }
        tab.refine(3);
        let mut y = tab.basic_values();
        for v in &mut y {
            if *v < 0.0 && *v >= -self.options.feasibility_tol {
                *v = 0.0;
            }
        }
        let x: Vec<f64> = maps.iter().map(|m| m.value(&y)).collect();
        if problem.max_violation(&x) > self.options.feasibility_tol * scale {
            return Ok(Attempt::Retry);
        }
        Ok(Attempt::Done(LpStatus::Optimal, Some(x)))
    }

    fn run_phase(&self, tab: &mut Tableau, cap: usize, iterations: &mut usize, phase_one: bool) -> Result<PhaseEnd> {
        let opts = &self.options;
        let mut pricing = Pricing::Dantzig;
        let mut degenerate_run = 0usize;
        loop {
            let Some(pc) = tab.choose_entering(pricing, opts.optimality_tol) else {
                return Ok(PhaseEnd::Optimal);
            };
            let Some(pr) = tab.choose_leaving(pc, pricing, opts.pivot_tol, opts.feasibility_tol) else {
                if phase_one {
                    return Err(Error::Internal("phase one reported unbounded".into()));
                }
                return Ok(PhaseEnd::Unbounded);
            };
            if *iterations >= cap {
                return Err(Error::Stalled { iterations: *iterations });
            }
            let before = tab.obj[tab.cols()];
            // A leaving row the relaxed ratio test let slip below zero is
            // shifted back to zero so the step never runs backwards; the
            // exact right-hand side is restored after the last pivot.
            if tab.rhs(pr) < 0.0 {
                let w = tab.width;
                tab.data[pr * w + w - 1] = 0.0;
            }
            tab.pivot(pr, pc, opts.exec);
            *iterations += 1;
            let gain = tab.obj[tab.cols()] - before;
            if gain.abs() <= 64.0 * f64::EPSILON * (1.0 + before.abs()) {
                degenerate_run += 1;
                if degenerate_run >= opts.stall_threshold {
                    pricing = Pricing::Bland;
                }
            } else {
                degenerate_run = 0;
                pricing = Pricing::Dantzig;
            }
        }
    }

    /// Dual simplex pivots removing the negative basic values left once the
    /// exact right-hand side is back. Entering columns come from a two-pass
    /// ratio test on the reduced costs that prefers large pivots.
    fn dual_cleanup(&self, tab: &mut Tableau, budget: usize, iterations: &mut usize) -> Result<Cleanup> {
        let opts = &self.options;
        let scale = 1.0 + tab.original_rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for _ in 0..2 * tab.rows + 10 {
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..tab.rows {
                let v = tab.rhs(r);
                if v < -opts.feasibility_tol * scale && leave.is_none_or(|(_, b)| v < b) {
                    leave = Some((r, v));
                }
            }
            let Some((pr, _)) = leave else {
                return Ok(Cleanup::Feasible);
            };
            let row_max = (0..tab.first_artificial).fold(0.0f64, |m, j| m.max(tab.at(pr, j).abs()));
            let floor = opts.pivot_tol.max(1e-9 * row_max);
            let mut bound = f64::INFINITY;
            for j in 0..tab.first_artificial {
                let a = tab.at(pr, j);
                if a < -floor {
                    bound = bound.min((tab.obj[j].max(0.0) + opts.optimality_tol) / -a);
                }
            }
            if bound.is_infinite() {
                return Ok(Cleanup::Stuck);
            }
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..tab.first_artificial {
                let a = tab.at(pr, j);
                if a < -floor && tab.obj[j].max(0.0) / -a <= bound && enter.is_none_or(|(_, b)| -a > b) {
                    enter = Some((j, -a));
                }
            }
            let (pc, _) = enter.expect("the bound came from a candidate");
            if *iterations >= budget {
                return Err(Error::Stalled { iterations: *iterations });
            }
            tab.pivot(pr, pc, opts.exec);
            *iterations += 1;
        }
        Ok(Cleanup::Stuck)
    }

    /// Pivots zero-level artificials out of the basis where some structural
    /// or slack column allows it. Rows where none does are redundant and keep
    /// their artificial basic at zero.
    fn drive_out_artificials(&self, tab: &mut Tableau) {
        for r in 0..tab.rows {
            if tab.basis[r] < tab.first_artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..tab.first_artificial {
                let a = tab.at(r, j).abs();
                if a > self.options.pivot_tol.max(1e-9) && best.is_none_or(|(_, b)| a > b) {
                    best = Some((j, a));
                }
            }
            if let Some((j, _)) = best {
                tab.pivot(r, j, self.options.exec);
            }
        }
    }

    fn standard_form(&self, p: &LpProblem, perturbation: f64) -> Result<(Tableau, Vec<VarMap>)> {
        // Column layout: structural | slacks | artificials.
        let mut maps = Vec::with_capacity(p.n);
        let mut offset = vec![0.0; p.n];
        let mut sign = vec![1.0; p.n];
        let mut ncols = 0usize;
        let mut ub_rows: Vec<(usize, f64)> = Vec::new();
        for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
            if lo.is_finite() {
                maps.push(VarMap::Shift { col: ncols, lo });
                offset[j] = lo;
                if hi.is_finite() {
                    ub_rows.push((ncols, hi - lo));
                }
                ncols += 1;
            } else if hi.is_finite() {
                maps.push(VarMap::Flip { col: ncols, hi });
                offset[j] = hi;
                sign[j] = -1.0;
                ncols += 1;
            } else {
                maps.push(VarMap::Free { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
        let structural = ncols;

        // Expand one row over structural columns; returns (coeffs, rhs').
        let expand = |coeffs: &[f64], rhs: f64| -> (Vec<f64>, f64) {
            let mut out = vec![0.0; structural];
            let mut shift = 0.0;
            for (j, &a) in coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                shift += a * offset[j];
                match maps[j] {
                    VarMap::Shift { col, .. } | VarMap::Flip { col, .. } => out[col] += a * sign[j],
                    VarMap::Free { pos, neg } => {
                        out[pos] += a;
                        out[neg] -= a;
                    }
                }
            }
            (out, rhs - shift)
        };

        // Each entry: structural coeffs, slack coefficient (0 if none), rhs.
        struct Pending {
            coeffs: Vec<f64>,
            slack: f64,
            rhs: f64,
        }
        let mut pending = Vec::with_capacity(p.row_count() + ub_rows.len());
        for row in &p.ineq_rows {
            let (c, r) = expand(&row.coeffs, row.rhs);
            pending.push(Pending { coeffs: c, slack: -1.0, rhs: r });
        }
        for &(col, ub) in &ub_rows {
            let mut c = vec![0.0; structural];
            c[col] = 1.0;
            pending.push(Pending { coeffs: c, slack: 1.0, rhs: ub });
        }
        for row in &p.eq_rows {
            let (c, r) = expand(&row.coeffs, row.rhs);
            pending.push(Pending { coeffs: c, slack: 0.0, rhs: r });
        }
        // Normalize rhs ≥ 0; a row whose slack then has coefficient +1 starts
        // with that slack basic, the rest need an artificial.
        for pr in &mut pending {
            if pr.rhs < 0.0 || (pr.rhs == 0.0 && pr.slack < 0.0) {
                pr.coeffs.iter_mut().for_each(|v| *v = -*v);
                pr.slack = -pr.slack;
                pr.rhs = -pr.rhs;
            }
        }
        let rows = pending.len();
        let slacks = pending.iter().filter(|r| r.slack != 0.0).count();
        let artificials = pending.iter().filter(|r| r.slack <= 0.0).count();
        let cols = structural + slacks + artificials;
        let width = cols + 1;
        let needed = rows as u128 * width as u128;
        if needed > self.options.max_tableau_entries as u128 {
            return Err(Error::Budget {
                what: "simplex tableau",
                needed,
                limit: self.options.max_tableau_entries as u128,
            });
        }

        let mut data = vec![0.0; rows * width];
        let mut basis = vec![0usize; rows];
        let mut next_slack = structural;
        let mut next_art = structural + slacks;
        for (r, pr) in pending.iter().enumerate() {
            let row = &mut data[r * width..(r + 1) * width];
            row[..structural].copy_from_slice(&pr.coeffs);
            row[cols] = pr.rhs;
            if pr.slack != 0.0 {
                row[next_slack] = pr.slack;
                if pr.slack > 0.0 {
                    basis[r] = next_slack;
                }
                next_slack += 1;
            }
            if pr.slack <= 0.0 {
                row[next_art] = 1.0;
                basis[r] = next_art;
                next_art += 1;
            }
        }

        let mut cost = vec![0.0; cols];
        for (j, &c) in p.objective.iter().enumerate() {
            match maps[j] {
                VarMap::Shift { col, .. } | VarMap::Flip { col, .. } => cost[col] += c * sign[j],
                VarMap::Free { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
            }
        }

        let mut original = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            original.extend_from_slice(&data[r * width..r * width + cols]);
        }
        let original_rhs = pending.iter().map(|r| r.rhs).collect();
        // Every inequality row gets a small deterministic relaxation so that
        // the start (and most later vertices) are nondegenerate. Equality
        // rows stay exact, which keeps the perturbed problem a relaxation.
        if perturbation > 0.0 {
            for (r, pr) in pending.iter().enumerate() {
                if pr.slack == 0.0 {
                    continue;
                }
                let size = pr.coeffs.iter().fold(1.0f64, |m, v| m.max(v.abs())).max(pr.rhs);
                let jitter = (r as f64 * 0.618_033_988_749_894_9).fract();
                let eps = perturbation * size * (1.0 + jitter);
                let rhs = &mut data[r * width + cols];
                if pr.slack > 0.0 {
                    *rhs += eps;
                } else {
                    *rhs -= eps.min(0.5 * *rhs);
                }
            }
        }
        let tab = Tableau {
            rows,
            width,
            data,
            obj: vec![0.0; width],
            initial_basic: basis.clone(),
            basis,
            first_artificial: structural + slacks,
            cost,
            original,
            original_rhs,
            pivot_row: Vec::with_capacity(width),
        };
        Ok((tab, maps))
    }
}
