//! Dense two-phase primal simplex for small linear programs.
//!
//! Problems are stated as
//!
//! ```text
//! maximize    c·x
//! subject to  A_eq·x  = b_eq
//!             A_ub·x <= b_ub
//!             x >= 0
//! ```
//!
//! Pivoting follows Bland's rule throughout, so the solver never cycles on
//! degenerate vertices. The problems this crate exists for (occupation-measure
//! programs over a handful of states) are tiny and dense, so the tableau is kept
//! as a plain row-major `Vec<f64>`.
//!
//! On optimality the solver also reports the dual multipliers of every row,
//! which is what the Lagrangian analysis downstream is built on.

mod simplex;

pub use simplex::solve_lp_with;

use thiserror::Error;

/// Default primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Default tolerance used when checking complementary slackness / duality gaps.
pub const DUALITY_GAP_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    MalformedProblem(String),
    #[error("simplex stalled after {iterations} pivots")]
    NumericalFailure { iterations: usize },
}

/// A linear program in the form described at the crate root.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub num_vars: usize,
    /// Objective coefficients, maximized.
    pub objective: Vec<f64>,
    pub eq_constraints: Vec<(Vec<f64>, f64)>,
    /// Rows `coeffs·x <= rhs`.
    pub ineq_constraints: Vec<(Vec<f64>, f64)>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
        }
    }

    /// Adds `coeffs·x = rhs` and returns its row index among equality rows.
    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> usize {
        self.eq_constraints.push((coeffs, rhs));
        self.eq_constraints.len() - 1
    }

    /// Adds `coeffs·x <= rhs` and returns its row index among inequality rows.
    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> usize {
        self.ineq_constraints.push((coeffs, rhs));
        self.ineq_constraints.len() - 1
    }

    /// Adds `coeffs·x >= rhs`, stored as the negated `<=` row.
    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) -> usize {
        let neg = coeffs.into_iter().map(|v| -v).collect();
        self.add_le(neg, -rhs)
    }

    pub fn num_constraints(&self) -> usize {
        self.eq_constraints.len() + self.ineq_constraints.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::MalformedProblem(format!(
                "objective has {} coefficients, expected {}",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::MalformedProblem(
                "objective has a non-finite coefficient".into(),
            ));
        }
        let rows = self
            .eq_constraints
            .iter()
            .map(|r| ("equality", r))
            .chain(self.ineq_constraints.iter().map(|r| ("inequality", r)));
        for (idx, (kind, (coeffs, rhs))) in rows.enumerate() {
            if coeffs.len() != self.num_vars {
                return Err(LpError::MalformedProblem(format!(
                    "{kind} row {idx} has {} coefficients, expected {}",
                    coeffs.len(),
                    self.num_vars
                )));
            }
            if !rhs.is_finite() || coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::MalformedProblem(format!(
                    "{kind} row {idx} has a non-finite entry"
                )));
            }
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any constraint (including `x >= 0`) at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().fold(0.0_f64, |m, &v| m.max(-v));
        for (coeffs, rhs) in &self.eq_constraints {
            worst = worst.max((dot(coeffs, x) - rhs).abs());
        }
        for (coeffs, rhs) in &self.ineq_constraints {
            worst = worst.max(dot(coeffs, x) - rhs);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    /// `c·x`; NaN unless optimal.
    pub objective_value: f64,
    /// One multiplier per inequality row, non-negative.
    pub dual_ineq: Vec<f64>,
    /// One multiplier per equality row (free sign).
    pub dual_eq: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            x: Vec::new(),
            objective_value: f64::NAN,
            dual_ineq: Vec::new(),
            dual_eq: Vec::new(),
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `b_eq·y_eq + b_ub·y_ub` for the multipliers carried by
    /// this solution. By weak duality it bounds the primal optimum from above.
    pub fn dual_objective(&self, problem: &LpProblem) -> f64 {
        let eq: f64 = problem
            .eq_constraints
            .iter()
            .zip(&self.dual_eq)
            .map(|((_, rhs), y)| rhs * y)
            .sum();
        let ub: f64 = problem
            .ineq_constraints
            .iter()
            .zip(&self.dual_ineq)
            .map(|((_, rhs), y)| rhs * y)
            .sum();
        eq + ub
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    /// Reduced costs below this are treated as non-improving.
    pub optimality_tol: f64,
    /// Smallest pivot magnitude accepted by the ratio test.
    pub pivot_tol: f64,
    /// Overrides the default cap of `10·(n + m)²` pivots.
    pub max_iterations: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: FEASIBILITY_TOL,
            optimality_tol: 1e-10,
            pivot_tol: 1e-11,
            max_iterations: None,
        }
    }
}

/// Solves `problem` with default options.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    solve_lp_with(problem, &LpOptions::default())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
