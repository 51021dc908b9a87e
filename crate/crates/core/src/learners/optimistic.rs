//! Joint optimization over occupation measures and plausible transition laws.
//!
//! The bilinear program "maximize over μ and p' in the confidence set" is
//! linearized with `z(s,a,s') = μ(s,a)·p'(s,a,s')`:
//!
//! ```text
//! maximize    Σ z(s,a,s') r(s,a)
//! subject to  Σ z = 1
//!             Σ_{a,s'} z(s,a,s') = Σ_{s',b} z(s',b,s)            ∀s
//!             Σ z(s,a,s') c_i(s,a) <= c_ub_i − d_i               ∀i
//!             |z(s,a,s') − p̂(s,a,s')·μ(s,a)| <= w(s,a,s')        ∀(s,a,s')
//!             Σ_{s'} w(s,a,s') <= ε(s,a)·μ(s,a)                  ∀(s,a)
//!             z, w >= 0
//! ```
//!
//! with `μ(s,a) = Σ_{s'} z(s,a,s')`. Because each confidence region is an L1
//! ball around one row, this is exact: any feasible `(z, w)` yields
//! `p' = z/μ` inside the ball and vice versa.

use cmdplab_lp::{solve_lp, LpProblem};

use crate::error::{Error, Result};
use crate::estimation::ConfidenceSet;
use crate::model::{CmdpShape, OccupationMeasure, Transitions};

/// Occupation mass below which a pair's optimistic row is not identifiable.
const MASS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimisticPlan {
    pub feasible: bool,
    pub mu_tilde: OccupationMeasure,
    pub p_tilde: Transitions,
    /// Optimistic average reward `r̃*`; NaN when infeasible.
    pub objective: f64,
    /// `Σ μ̃ c_i` for each cost; NaN when infeasible.
    pub planned_costs: Vec<f64>,
}

pub fn plan_optimistic(
    cset: &ConfidenceSet,
    shape: &CmdpShape,
    tighten: &[f64],
) -> Result<OptimisticPlan> {
    let (ns, na, m) = (shape.n_states, shape.n_actions, shape.n_costs());
    if cset.n_states() != ns || cset.n_actions() != na {
        return Err(Error::DimensionMismatch(format!(
            "confidence set is {}x{}, shape is {ns}x{na}",
            cset.n_states(),
            cset.n_actions()
        )));
    }
    if tighten.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} tightening terms for {m} costs",
            tighten.len()
        )));
    }
    if tighten.iter().any(|&d| !(d >= 0.0)) {
        return Err(Error::InvalidInputs("tightening must be non-negative".into()));
    }

    let n_z = ns * na * ns;
    let z = |s: usize, a: usize, t: usize| (s * na + a) * ns + t;
    let w = |s: usize, a: usize, t: usize| n_z + z(s, a, t);
    let nv = 2 * n_z;

    let mut objective = vec![0.0; nv];
    for s in 0..ns {
        for a in 0..na {
            for t in 0..ns {
                objective[z(s, a, t)] = shape.r[s][a];
            }
        }
    }
    let mut lp = LpProblem::new(objective);

    let mut total = vec![0.0; nv];
    total[..n_z].fill(1.0);
    lp.add_eq(total, 1.0);

    for s in 0..ns {
        let mut row = vec![0.0; nv];
        for a in 0..na {
            for t in 0..ns {
                row[z(s, a, t)] += 1.0;
            }
        }
        for u in 0..ns {
            for b in 0..na {
                row[z(u, b, s)] -= 1.0;
            }
        }
        lp.add_eq(row, 0.0);
    }

    for (ci, (ub, d)) in shape.c.iter().zip(shape.c_ub.iter().zip(tighten)) {
        let mut row = vec![0.0; nv];
        for s in 0..ns {
            for a in 0..na {
                for t in 0..ns {
                    row[z(s, a, t)] = ci[s][a];
                }
            }
        }
        lp.add_le(row, ub - d);
    }

    for s in 0..ns {
        for a in 0..na {
            let p_hat = &cset.p_hat[s][a];
            for t in 0..ns {
                // z − p̂·μ − w <= 0   and   −z + p̂·μ − w <= 0
                let mut upper = vec![0.0; nv];
                for u in 0..ns {
                    upper[z(s, a, u)] = -p_hat[t];
                }
                upper[z(s, a, t)] += 1.0;
                let mut lower: Vec<f64> = upper.iter().map(|v| -v).collect();
                upper[w(s, a, t)] = -1.0;
                lower[w(s, a, t)] = -1.0;
                lp.add_le(upper, 0.0);
                lp.add_le(lower, 0.0);
            }
            let mut ball = vec![0.0; nv];
            for t in 0..ns {
                ball[w(s, a, t)] = 1.0;
                ball[z(s, a, t)] = -cset.eps[s][a];
            }
            lp.add_le(ball, 0.0);
        }
    }

    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Ok(OptimisticPlan {
            feasible: false,
            mu_tilde: OccupationMeasure {
                mu: vec![vec![0.0; na]; ns],
            },
            p_tilde: fallback_law(cset),
            objective: f64::NAN,
            planned_costs: vec![f64::NAN; m],
        });
    }

    let zx = |s, a, t| sol.x[z(s, a, t)].max(0.0);
    let mu: Vec<Vec<f64>> = (0..ns)
        .map(|s| (0..na).map(|a| (0..ns).map(|t| zx(s, a, t)).sum()).collect())
        .collect();
    let mut p_tilde = fallback_law(cset);
    for s in 0..ns {
        for a in 0..na {
            if mu[s][a] > MASS_EPS {
                p_tilde[s][a] = (0..ns).map(|t| zx(s, a, t) / mu[s][a]).collect();
            }
        }
    }
    let mu_tilde = OccupationMeasure { mu };
    Ok(OptimisticPlan {
        feasible: true,
        objective: mu_tilde.expectation(&shape.r),
        planned_costs: shape.c.iter().map(|c| mu_tilde.expectation(c)).collect(),
        mu_tilde,
        p_tilde,
    })
}

/// `p̂` where its row is a distribution, uniform elsewhere.
fn fallback_law(cset: &ConfidenceSet) -> Transitions {
    let ns = cset.n_states();
    cset.p_hat
        .iter()
        .map(|rows| {
            rows.iter()
                .map(|row| {
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() <= 1e-12 {
                        row.clone()
                    } else {
                        vec![1.0 / ns as f64; ns]
                    }
                })
                .collect()
        })
        .collect()
}
