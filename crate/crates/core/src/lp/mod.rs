//! Dense linear programs in "maximize, `≥`/`=` rows, box bounds" form and a
//! two-phase primal simplex solver for them.

mod dump;
mod simplex;

pub use simplex::{solve_lp, Simplex, SolverOptions};

use crate::error::{dims, invalid, Result};
use serde::Serialize;

/// One linear row, `coeffs · x (≥ | =) rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Row { coeffs, rhs }
    }

    fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    fn scale(&self) -> f64 {
        self.coeffs.iter().fold(self.rhs.abs(), |m, v| m.max(v.abs())).max(1.0)
    }
}

/// `maximize objective · x` subject to `ineq_rows` (`≥`), `eq_rows` (`=`)
/// and per-variable `[lo, hi]` bounds. Bounds default to `[0, +∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub n: usize,
    pub objective: Vec<f64>,
    pub ineq_rows: Vec<Row>,
    pub eq_rows: Vec<Row>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem { n, objective, ineq_rows: Vec::new(), eq_rows: Vec::new(), bounds: vec![(0.0, f64::INFINITY); n] }
    }

    /// Adds `coeffs · x ≥ rhs`.
    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_rows.push(Row::new(coeffs, rhs));
        self
    }

    /// Adds `coeffs · x ≤ rhs`, stored as the negated `≥` row.
    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        let neg = coeffs.into_iter().map(|v| -v).collect();
        self.ineq_rows.push(Row::new(neg, -rhs));
        self
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_rows.push(Row::new(coeffs, rhs));
        self
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) -> &mut Self {
        self.bounds[j] = (lo, hi);
        self
    }

    pub fn row_count(&self) -> usize {
        self.ineq_rows.len() + self.eq_rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n {
            return Err(dims(format!("objective has {} entries for {} variables", self.objective.len(), self.n)));
        }
        if self.bounds.len() != self.n {
            return Err(dims(format!("{} bounds for {} variables", self.bounds.len(), self.n)));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite objective coefficient"));
        }
        for (k, row) in self.ineq_rows.iter().chain(&self.eq_rows).enumerate() {
            if row.coeffs.len() != self.n {
                return Err(dims(format!("row {k} has {} coefficients, expected {}", row.coeffs.len(), self.n)));
            }
            if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("row {k} has a non-finite entry")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(invalid(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    /// Largest constraint violation of `x`, each row scaled by its largest
    /// absolute entry (at least 1).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.ineq_rows {
            worst = worst.max((row.rhs - row.activity(x)) / row.scale());
        }
        for row in &self.eq_rows {
            worst = worst.max((row.rhs - row.activity(x)).abs() / row.scale());
        }
        for (&v, &(lo, hi)) in x.iter().zip(&self.bounds) {
            worst = worst.max(lo - v).max(v - hi);
        }
        worst.max(0.0)
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status` is optimal.
    pub x: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
