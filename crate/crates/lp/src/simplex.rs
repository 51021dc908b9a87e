use crate::{LpError, LpOptions, LpProblem, LpSolution, LpStatus};

/// Where the initial identity column of a row lives, and whether the row was
/// negated to make its right-hand side non-negative.
#[derive(Debug, Clone, Copy)]
struct RowInfo {
    identity_col: usize,
    negated: bool,
}

struct Tableau {
    rows: usize,
    /// Number of columns excluding the right-hand side.
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let inv = 1.0 / self.at(pr, pc);
        for v in &mut self.data[pr * w..(pr + 1) * w] {
            *v *= inv;
        }
        self.data[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for (v, p) in row.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            row[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Reduced costs `c_j - c_B·B⁻¹A_j` for a maximization objective.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d = cost.to_vec();
        for r in 0..self.rows {
            let cb = cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            for (j, dj) in d.iter_mut().enumerate() {
                *dj -= cb * self.at(r, j);
            }
        }
        d
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        (0..self.rows).map(|r| cost[self.basis[r]] * self.rhs(r)).sum()
    }
}

enum PhaseOutcome {
    Optimal,
    Unbounded,
}

/// Runs primal simplex iterations maximizing `cost` with Bland's rule.
/// Only columns with `allowed[j]` may enter the basis.
fn iterate(
    tab: &mut Tableau,
    cost: &[f64],
    allowed: &[bool],
    opts: &LpOptions,
    iterations: &mut usize,
    cap: usize,
) -> Result<PhaseOutcome, LpError> {
    loop {
        let d = tab.reduced_costs(cost);
        let entering = (0..tab.cols).find(|&j| allowed[j] && d[j] > opts.optimality_tol);
        let Some(pc) = entering else {
            return Ok(PhaseOutcome::Optimal);
        };

        let mut leave: Option<(usize, f64)> = None;
        for r in 0..tab.rows {
            let a = tab.at(r, pc);
            if a <= opts.pivot_tol {
                continue;
            }
            let ratio = tab.rhs(r).max(0.0) / a;
            leave = match leave {
                None => Some((r, ratio)),
                Some((lr, lratio)) => {
                    let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                    if (tie && tab.basis[r] < tab.basis[lr]) || (!tie && ratio < lratio) {
                        Some((r, ratio))
                    } else {
                        Some((lr, lratio))
                    }
                }
            };
        }
        let Some((pr, _)) = leave else {
            return Ok(PhaseOutcome::Unbounded);
        };

        if *iterations >= cap {
            return Err(LpError::NumericalFailure {
                iterations: *iterations,
            });
        }
        tab.pivot(pr, pc);
        *iterations += 1;
    }
}

/// Solves `problem` with explicit solver options.
pub fn solve_lp_with(problem: &LpProblem, opts: &LpOptions) -> Result<LpSolution, LpError> {
    problem.validate()?;

    let n = problem.num_vars;
    let n_eq = problem.eq_constraints.len();
    let n_ub = problem.ineq_constraints.len();
    let m = n_eq + n_ub;
    let cap = opts
        .max_iterations
        .unwrap_or(10 * (n + m).max(1) * (n + m).max(1));

    // Column layout: [original | one slack per inequality row | artificials].
    let slack0 = n;
    let art0 = n + n_ub;
    let mut infos = Vec::with_capacity(m);
    let mut n_art = 0;
    for (_, rhs) in &problem.eq_constraints {
        infos.push(RowInfo {
            identity_col: art0 + n_art,
            negated: *rhs < 0.0,
        });
        n_art += 1;
    }
    for (k, (_, rhs)) in problem.ineq_constraints.iter().enumerate() {
        if *rhs >= 0.0 {
            infos.push(RowInfo {
                identity_col: slack0 + k,
                negated: false,
            });
        } else {
            infos.push(RowInfo {
                identity_col: art0 + n_art,
                negated: true,
            });
            n_art += 1;
        }
    }
    let cols = art0 + n_art;
    let w = cols + 1;

    let mut tab = Tableau {
        rows: m,
        cols,
        data: vec![0.0; m * w],
        basis: infos.iter().map(|i| i.identity_col).collect(),
    };
    let all_rows = problem
        .eq_constraints
        .iter()
        .map(|r| (r, None))
        .chain(
            problem
                .ineq_constraints
                .iter()
                .enumerate()
                .map(|(k, r)| (r, Some(slack0 + k))),
        );
    for (r, ((coeffs, rhs), slack)) in all_rows.enumerate() {
        let sign = if infos[r].negated { -1.0 } else { 1.0 };
        let row = &mut tab.data[r * w..(r + 1) * w];
        for (j, c) in coeffs.iter().enumerate() {
            row[j] = sign * c;
        }
        if let Some(sc) = slack {
            row[sc] = sign;
        }
        row[infos[r].identity_col] = 1.0;
        row[cols] = sign * rhs;
    }

    let mut iterations = 0;
    let rhs_scale = 1.0_f64.max(
        (0..m)
            .map(|r| tab.rhs(r).abs())
            .fold(0.0_f64, f64::max),
    );

    // Phase 1: maximize -Σ artificials.
    if n_art > 0 {
        let mut cost1 = vec![0.0; cols];
        for c in &mut cost1[art0..] {
            *c = -1.0;
        }
        let allowed = vec![true; cols];
        iterate(&mut tab, &cost1, &allowed, opts, &mut iterations, cap)?;
        if -tab.objective(&cost1) > opts.feasibility_tol * rhs_scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, iterations));
        }
        // Drive zero-valued artificials out of the basis where possible; rows
        // where that fails are redundant and keep their artificial at zero.
        for r in 0..m {
            if tab.basis[r] < art0 {
                continue;
            }
            let col = (0..art0).find(|&j| tab.at(r, j).abs() > opts.pivot_tol.max(1e-9));
            if let Some(pc) = col {
                tab.pivot(r, pc);
                iterations += 1;
            }
        }
    }

    // Phase 2.
    let mut cost2 = vec![0.0; cols];
    cost2[..n].copy_from_slice(&problem.objective);
    let allowed: Vec<bool> = (0..cols).map(|j| j < art0).collect();
    match iterate(&mut tab, &cost2, &allowed, opts, &mut iterations, cap)? {
        PhaseOutcome::Unbounded => {
            return Ok(LpSolution::without_point(LpStatus::Unbounded, iterations))
        }
        PhaseOutcome::Optimal => {}
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        let b = tab.basis[r];
        if b < n {
            x[b] = tab.rhs(r).max(0.0);
        }
    }

    // y = c_B·B⁻¹; column i of B⁻¹ is the current image of row i's identity column.
    let duals: Vec<f64> = infos
        .iter()
        .map(|info| {
            let y: f64 = (0..m)
                .map(|r| cost2[tab.basis[r]] * tab.at(r, info.identity_col))
                .sum();
            if info.negated {
                -y
            } else {
                y
            }
        })
        .collect();
    let dual_eq = duals[..n_eq].to_vec();
    let dual_ineq = duals[n_eq..]
        .iter()
        .map(|&y| if y < 0.0 && y > -opts.feasibility_tol { 0.0 } else { y })
        .collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: problem.objective_at(&x),
        x,
        dual_ineq,
        dual_eq,
        iterations,
    })
}
